#include "refcomm/agents.hpp"

#include "binary_io.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace refcomm {

void ChannelSpec::validate() const {
  if (message_dim < 1) throw ParameterError("channel: message_dim must be >= 1");
  if (discrete() && vocab_size < 2) throw ParameterError("channel: vocab_size must be >= 2");
  if (!(gumbel_tau > 0.0)) throw ParameterError("channel: gumbel_tau must be > 0");
  if (decoder_hidden < 0) throw ParameterError("channel: decoder_hidden must be >= 0");
}

const char* to_string(ChannelKind k) { return k == ChannelKind::continuous ? "continuous" : "discrete"; }
const char* to_string(Estimator e) { return e == Estimator::gumbel ? "gumbel" : "reinforce"; }

// Checkpoint body:
//   str16 architecture
//   u8 kind | u32 message_dim | u32 vocab | f64 tau | u8 estimator | u8 straight_through | u32 decoder_hidden
//   f64 cosine_temperature (receiver only) | u8 frozen
//   u32 tensor_count, tensor_count x (str16 name | u32 rows | u32 cols | rows*cols f32)

namespace {

constexpr char kCheckpointMagic[4] = {'R', 'C', 'K', '1'};
enum class Role : std::uint8_t { sender = 0, receiver = 1 };

void put_header(std::string& out, Role role, const std::string& arch, const ChannelSpec& c) {
  out.append(kCheckpointMagic, 4);
  io::put_u16(out, kCheckpointVersion);
  io::put_u8(out, static_cast<std::uint8_t>(role));
  io::put_str16(out, arch);
  io::put_u8(out, static_cast<std::uint8_t>(c.kind));
  io::put_u32(out, static_cast<std::uint32_t>(c.message_dim));
  io::put_u32(out, static_cast<std::uint32_t>(c.vocab_size));
  io::put_f64(out, c.gumbel_tau);
  io::put_u8(out, static_cast<std::uint8_t>(c.train_estimator));
  io::put_u8(out, c.straight_through ? 1 : 0);
  io::put_u32(out, static_cast<std::uint32_t>(c.decoder_hidden));
}

template <typename Derived>
void put_tensor(std::string& out, const std::string& name, const Eigen::PlainObjectBase<Derived>& m) {
  io::put_str16(out, name);
  io::put_u32(out, static_cast<std::uint32_t>(m.rows()));
  io::put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Index i = 0; i < m.size(); ++i) io::put_f32(out, m.data()[i]);
}

struct Header {
  Role role;
  std::string architecture;
  ChannelSpec channel;
};

Header read_header(io::ByteReader& in) {
  const auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) throw FormatError("bad checkpoint magic", 0);
  const auto at = in.offset();
  const auto version = in.uint<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), at);
  }
  Header h;
  const auto role = in.uint<std::uint8_t>("role");
  if (role > 1) throw FormatError("bad checkpoint role", in.offset() - 1);
  h.role = static_cast<Role>(role);
  h.architecture = in.str16("architecture");
  const auto kind = in.uint<std::uint8_t>("channel kind");
  if (kind > 1) throw FormatError("bad channel kind", in.offset() - 1);
  h.channel.kind = static_cast<ChannelKind>(kind);
  h.channel.message_dim = in.uint<std::uint32_t>("message_dim");
  h.channel.vocab_size = in.uint<std::uint32_t>("vocab_size");
  h.channel.gumbel_tau = in.f64("gumbel_tau");
  const auto est = in.uint<std::uint8_t>("estimator");
  if (est > 1) throw FormatError("bad estimator", in.offset() - 1);
  h.channel.train_estimator = static_cast<Estimator>(est);
  h.channel.straight_through = in.uint<std::uint8_t>("straight_through") != 0;
  h.channel.decoder_hidden = in.uint<std::uint32_t>("decoder_hidden");
  return h;
}

std::map<std::string, MatrixF> read_tensors(io::ByteReader& in) {
  std::map<std::string, MatrixF> out;
  const auto count = in.uint<std::uint32_t>("tensor count");
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = in.str16("tensor name");
    const auto rows = in.uint<std::uint32_t>("rows");
    const auto cols = in.uint<std::uint32_t>("cols");
    in.need(4ULL * rows * cols, "tensor data");
    MatrixF m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = in.f32("tensor data");
    out.emplace(std::move(name), std::move(m));
  }
  if (in.remaining() != 0) throw FormatError("trailing bytes in checkpoint", in.offset());
  return out;
}

MatrixF take_tensor(std::map<std::string, MatrixF>& t, const std::string& name) {
  auto it = t.find(name);
  if (it == t.end()) throw FormatError("checkpoint missing tensor '" + name + "'", 0);
  return std::move(it->second);
}

VectorF as_vector(const MatrixF& m) { return Eigen::Map<const VectorF>(m.data(), m.size()); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

std::string encode_checkpoint(const Sender<float>& s) {
  std::string out;
  put_header(out, Role::sender, s.architecture, s.channel);
  io::put_u8(out, s.frozen ? 1 : 0);
  io::put_u32(out, 2);
  put_tensor(out, "weight", s.weight);
  put_tensor(out, "bias", s.bias);
  return out;
}

std::string encode_checkpoint(const Receiver<float>& r) {
  std::string out;
  put_header(out, Role::receiver, r.architecture, r.channel);
  io::put_f64(out, r.cosine_temperature);
  io::put_u8(out, r.frozen ? 1 : 0);
  std::uint32_t n = 4;
  if (r.has_decoder()) ++n;
  if (r.decoder_has_hidden()) n += 3;
  io::put_u32(out, n);
  put_tensor(out, "w1", r.w1);
  put_tensor(out, "b1", r.b1);
  put_tensor(out, "w2", r.w2);
  put_tensor(out, "b2", r.b2);
  if (r.has_decoder()) put_tensor(out, "decoder", r.decoder);
  if (r.decoder_has_hidden()) {
    put_tensor(out, "decoder_bias", r.decoder_bias);
    put_tensor(out, "decoder_out", r.decoder_out);
    put_tensor(out, "decoder_out_bias", r.decoder_out_bias);
  }
  return out;
}

Sender<float> decode_sender_checkpoint(std::string_view bytes) {
  io::ByteReader in(bytes);
  Header h = read_header(in);
  if (h.role != Role::sender) throw FormatError("checkpoint holds a receiver, expected a sender", 6);
  Sender<float> s;
  s.architecture = h.architecture;
  s.channel = h.channel;
  s.frozen = in.uint<std::uint8_t>("frozen") != 0;
  auto t = read_tensors(in);
  s.weight = take_tensor(t, "weight");
  s.bias = as_vector(take_tensor(t, "bias"));
  if (s.weight.rows() != s.channel.sender_output_dim() || s.bias.size() != s.weight.rows()) {
    throw FormatError("sender tensor shapes do not match channel", 0);
  }
  return s;
}

Receiver<float> decode_receiver_checkpoint(std::string_view bytes) {
  io::ByteReader in(bytes);
  Header h = read_header(in);
  if (h.role != Role::receiver) throw FormatError("checkpoint holds a sender, expected a receiver", 6);
  Receiver<float> r;
  r.architecture = h.architecture;
  r.channel = h.channel;
  r.cosine_temperature = in.f64("cosine_temperature");
  r.frozen = in.uint<std::uint8_t>("frozen") != 0;
  auto t = read_tensors(in);
  r.w1 = take_tensor(t, "w1");
  r.b1 = as_vector(take_tensor(t, "b1"));
  r.w2 = take_tensor(t, "w2");
  r.b2 = as_vector(take_tensor(t, "b2"));
  if (r.channel.discrete()) {
    r.decoder = take_tensor(t, "decoder");
    if (r.channel.decoder_hidden > 0) {
      r.decoder_bias = as_vector(take_tensor(t, "decoder_bias"));
      r.decoder_out = take_tensor(t, "decoder_out");
      r.decoder_out_bias = as_vector(take_tensor(t, "decoder_out_bias"));
    }
  }
  if (r.w2.rows() != r.channel.message_dim || r.w2.cols() != r.w1.rows()) {
    throw FormatError("receiver mapper shapes do not match channel", 0);
  }
  return r;
}

void write_checkpoint(const Sender<float>& s, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(s));
}

void write_checkpoint(const Receiver<float>& r, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(r));
}

Sender<float> read_sender_checkpoint(const std::filesystem::path& path) {
  return decode_sender_checkpoint(read_file(path));
}

Receiver<float> read_receiver_checkpoint(const std::filesystem::path& path) {
  return decode_receiver_checkpoint(read_file(path));
}

std::uint64_t checkpoint_hash(const Sender<float>& s) { return fnv1a64(encode_checkpoint(s)); }
std::uint64_t checkpoint_hash(const Receiver<float>& r) { return fnv1a64(encode_checkpoint(r)); }

}  // namespace refcomm
