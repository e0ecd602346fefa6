#ifndef REFCOMM_REPORT_HPP
#define REFCOMM_REPORT_HPP

#include "refcomm/eval.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace refcomm {

// Metrics JSONL schema, one object per epoch:
//   {"epoch": int, "train_loss": float, "train_acc": float, "test_acc": float, "effective_epochs": float}
// Summary JSON: epochs_to_peak, peak_test_acc, epochs_run, senders, receivers,
// pair_test_acc (rows = senders), pair_counts. Wall time is kept out of both
// so reruns are byte-identical; it goes to a separate timing file.

nlohmann::json to_json(const EpochRecord& e);
nlohmann::json to_json(const RunMetrics& m);
nlohmann::json to_json(const AccuracyStat& a);
nlohmann::json to_json(const AccuracyMatrix& m);
nlohmann::json to_json(const DistanceDistribution& d, bool include_values = false);
nlohmann::json to_json(const PcaReport& p);
nlohmann::json to_json(const ProbeRow& p);
nlohmann::json to_json(const VocabSweepRow& v);

/// Keys every metrics JSONL record must carry.
const std::vector<std::string>& epoch_record_keys();

std::string metrics_jsonl(const RunMetrics& m);
std::string matrix_csv(const AccuracyMatrix& m);

/// Aligned-column text table; numeric cells are right-aligned.
std::string format_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

/// Fixed-precision percentage ("97.33").
std::string percent(double fraction, int digits = 2);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace refcomm

#endif  // REFCOMM_REPORT_HPP
