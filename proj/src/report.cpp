#include "refcomm/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace refcomm {

namespace {

nlohmann::json matrix_rows(const MatrixD& m) {
  auto rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

bool looks_numeric(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

}  // namespace

nlohmann::json to_json(const EpochRecord& e) {
  return {{"epoch", e.epoch},
          {"train_loss", e.train_loss},
          {"train_acc", e.train_acc},
          {"test_acc", e.test_acc},
          {"effective_epochs", e.effective_epochs}};
}

const std::vector<std::string>& epoch_record_keys() {
  static const std::vector<std::string> keys = {"epoch", "train_loss", "train_acc", "test_acc", "effective_epochs"};
  return keys;
}

nlohmann::json to_json(const RunMetrics& m) {
  return {{"epochs_to_peak", m.epochs_to_peak},
          {"peak_test_acc", m.peak_test_acc},
          {"epochs_run", m.epochs.size()},
          {"senders", m.sender_names},
          {"receivers", m.receiver_names},
          {"pair_test_acc", matrix_rows(m.pair_test_acc)},
          {"pair_counts", m.pair_counts}};
}

nlohmann::json to_json(const AccuracyStat& a) {
  return {{"mean", a.mean}, {"sd", a.sd}, {"repeats", a.repeats}, {"rounds", a.rounds}, {"chance", a.chance}};
}

nlohmann::json to_json(const AccuracyMatrix& m) {
  return {{"senders", m.senders}, {"receivers", m.receivers}, {"accuracy", matrix_rows(m.acc)},
          {"min", m.min()}, {"mean", m.mean()}};
}

nlohmann::json to_json(const DistanceDistribution& d, bool include_values) {
  nlohmann::json j = {{"count", d.values.size()}, {"mean", d.mean}, {"q1", d.q1}, {"median", d.median},
                      {"q3", d.q3}};
  if (include_values) j["values"] = d.values;
  return j;
}

nlohmann::json to_json(const PcaReport& p) {
  std::vector<double> ratios(p.pca.explained_ratio.data(), p.pca.explained_ratio.data() + p.pca.explained_ratio.size());
  std::vector<double> eig(p.pca.eigenvalues.data(), p.pca.eigenvalues.data() + p.pca.eigenvalues.size());
  return {{"samples", p.pca.samples},
          {"eigenvalues", eig},
          {"explained_ratio", ratios},
          {"ratio_sum", p.pca.explained_ratio.sum()},
          {"correlation", matrix_rows(p.pca.correlation)},
          {"dominant_dimension", p.dominant_dimension},
          {"correlated_dimensions", p.correlated_dimensions}};
}

nlohmann::json to_json(const ProbeRow& p) {
  nlohmann::json j = {{"sender", p.sender}, {"native", p.native}, {"transfer", p.transfer}};
  j["transfer_mean"] = p.transfer.empty() ? nlohmann::json() : nlohmann::json(p.transfer_mean());
  return j;
}

nlohmann::json to_json(const VocabSweepRow& v) {
  return {{"vocab_size", v.vocab_size}, {"in_domain_acc", v.in_domain_acc}, {"ood_acc", v.ood_acc},
          {"epochs_to_peak", v.epochs_to_peak}};
}

std::string metrics_jsonl(const RunMetrics& m) {
  std::string out;
  for (const auto& e : m.epochs) out += to_json(e).dump() + "\n";
  return out;
}

std::string matrix_csv(const AccuracyMatrix& m) {
  std::ostringstream out;
  out << "sender";
  for (const auto& r : m.receivers) out << ',' << r;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < m.senders.size(); ++i) {
    out << m.senders[i];
    for (std::size_t j = 0; j < m.receivers.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.6f", m.acc(static_cast<Index>(i), static_cast<Index>(j)));
      out << ',' << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string format_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string cell = c < cells.size() ? cells[c] : "";
      const std::string pad(width[c] - cell.size(), ' ');
      if (c) s += "  ";
      s += (c > 0 && looks_numeric(cell)) ? pad + cell : cell + pad;
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') + "\n";
  for (const auto& row : rows) out += line(row);
  return out;
}

std::string percent(double fraction, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, 100.0 * fraction);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace refcomm
