#ifndef REFCOMM_AGENTS_HPP
#define REFCOMM_AGENTS_HPP

#include "refcomm/numerics.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace refcomm {

enum class ChannelKind { continuous, discrete };
enum class Estimator { gumbel, reinforce };

struct ChannelSpec {
  ChannelKind kind = ChannelKind::continuous;
  Index message_dim = 16;   ///< continuous message length; also the receiver's comparison space
  Index vocab_size = 256;   ///< discrete only
  double gumbel_tau = 5.0;
  Estimator train_estimator = Estimator::gumbel;
  bool straight_through = false;
  Index decoder_hidden = 0;  ///< 0: plain vocab x message_dim embedding

  bool discrete() const noexcept { return kind == ChannelKind::discrete; }
  /// Width of the sender's output layer.
  Index sender_output_dim() const noexcept { return discrete() ? vocab_size : message_dim; }
  void validate() const;

  friend bool operator==(const ChannelSpec&, const ChannelSpec&) = default;
};

enum class Mode { train, eval };

template <typename Scalar>
struct Message {
  Vector<Scalar> payload;
  std::optional<Index> symbol;
};

// ---------------------------------------------------------------------------

/// Linear communication module: embedding -> message (or symbol logits).
template <typename Scalar>
struct Sender {
  std::string architecture;
  ChannelSpec channel;
  Matrix<Scalar> weight;  ///< (output_dim x input_dim)
  Vector<Scalar> bias;
  bool frozen = false;

  Index input_dim() const noexcept { return weight.cols(); }
  Index parameter_count() const noexcept { return weight.size() + bias.size(); }

  static Sender init(std::string architecture, Index input_dim, const ChannelSpec& channel, Rng& rng);

  std::vector<ParamView<Scalar>> parameters() {
    return {param_view<Scalar>("sender.weight", weight), param_view<Scalar>("sender.bias", bias)};
  }

  Sender zeros_like() const {
    Sender g = *this;
    g.weight.setZero();
    g.bias.setZero();
    return g;
  }

  template <typename Other>
  Sender<Other> cast() const {
    return {architecture, channel, weight.template cast<Other>(), bias.template cast<Other>(), frozen};
  }
};

/// Mapper (two linear layers around a ReLU) plus, for discrete channels, a
/// decoder from symbols back to the comparison space.
template <typename Scalar>
struct Receiver {
  std::string architecture;
  ChannelSpec channel;
  Matrix<Scalar> w1;  ///< (hidden x input_dim)
  Vector<Scalar> b1;
  Matrix<Scalar> w2;  ///< (message_dim x hidden)
  Vector<Scalar> b2;
  Matrix<Scalar> decoder;             ///< (vocab x message_dim) or (vocab x decoder_hidden)
  Vector<Scalar> decoder_bias;        ///< decoder_hidden only
  Matrix<Scalar> decoder_out;         ///< (message_dim x decoder_hidden), decoder_hidden only
  Vector<Scalar> decoder_out_bias;
  double cosine_temperature = 0.1;
  bool frozen = false;

  Index input_dim() const noexcept { return w1.cols(); }
  Index hidden_dim() const noexcept { return w1.rows(); }
  bool has_decoder() const noexcept { return decoder.size() > 0; }
  bool decoder_has_hidden() const noexcept { return decoder_out.size() > 0; }
  Index parameter_count() const noexcept;

  static Receiver init(std::string architecture, Index input_dim, Index hidden_dim, const ChannelSpec& channel,
                       double cosine_temperature, Rng& rng);

  std::vector<ParamView<Scalar>> parameters() {
    std::vector<ParamView<Scalar>> p = {
        param_view<Scalar>("receiver.w1", w1), param_view<Scalar>("receiver.b1", b1),
        param_view<Scalar>("receiver.w2", w2), param_view<Scalar>("receiver.b2", b2)};
    if (has_decoder()) p.push_back(param_view<Scalar>("receiver.decoder", decoder));
    if (decoder_has_hidden()) {
      p.push_back(param_view<Scalar>("receiver.decoder_bias", decoder_bias));
      p.push_back(param_view<Scalar>("receiver.decoder_out", decoder_out));
      p.push_back(param_view<Scalar>("receiver.decoder_out_bias", decoder_out_bias));
    }
    return p;
  }

  Receiver zeros_like() const {
    Receiver g = *this;
    for (auto& p : g.parameters()) p.values().setZero();
    return g;
  }

  template <typename Other>
  Receiver<Other> cast() const {
    Receiver<Other> r;
    r.architecture = architecture;
    r.channel = channel;
    r.w1 = w1.template cast<Other>();
    r.b1 = b1.template cast<Other>();
    r.w2 = w2.template cast<Other>();
    r.b2 = b2.template cast<Other>();
    r.decoder = decoder.template cast<Other>();
    r.decoder_bias = decoder_bias.template cast<Other>();
    r.decoder_out = decoder_out.template cast<Other>();
    r.decoder_out_bias = decoder_out_bias.template cast<Other>();
    r.cosine_temperature = cosine_temperature;
    r.frozen = frozen;
    return r;
  }
};

template <typename Scalar>
void set_frozen(Sender<Scalar>& s, bool frozen) { s.frozen = frozen; }
template <typename Scalar>
void set_frozen(Receiver<Scalar>& r, bool frozen) { r.frozen = frozen; }

namespace detail {

template <typename Derived>
void fill_uniform(Eigen::PlainObjectBase<Derived>& m, double bound, Rng& rng) {
  using Scalar = typename Derived::Scalar;
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(u(rng));
}

/// nn.Linear-style init: weights and bias uniform in ±1/sqrt(fan_in).
template <typename Scalar>
void init_linear(Matrix<Scalar>& w, Vector<Scalar>& b, Index out, Index in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  w.resize(out, in);
  b.resize(out);
  fill_uniform(w, bound, rng);
  fill_uniform(b, bound, rng);
}

}  // namespace detail

template <typename Scalar>
Sender<Scalar> Sender<Scalar>::init(std::string architecture, Index input_dim, const ChannelSpec& channel,
                                    Rng& rng) {
  channel.validate();
  if (input_dim < 1) throw ParameterError("Sender::init: input_dim must be >= 1");
  Sender s;
  s.architecture = std::move(architecture);
  s.channel = channel;
  detail::init_linear(s.weight, s.bias, channel.sender_output_dim(), input_dim, rng);
  return s;
}

template <typename Scalar>
Receiver<Scalar> Receiver<Scalar>::init(std::string architecture, Index input_dim, Index hidden_dim,
                                        const ChannelSpec& channel, double cosine_temperature, Rng& rng) {
  channel.validate();
  if (input_dim < 1 || hidden_dim < 1) throw ParameterError("Receiver::init: dims must be >= 1");
  if (!(cosine_temperature > 0.0)) throw ParameterError("Receiver::init: cosine temperature must be > 0");
  Receiver r;
  r.architecture = std::move(architecture);
  r.channel = channel;
  r.cosine_temperature = cosine_temperature;
  detail::init_linear(r.w1, r.b1, hidden_dim, input_dim, rng);
  detail::init_linear(r.w2, r.b2, channel.message_dim, hidden_dim, rng);
  if (channel.discrete()) {
    const Index width = channel.decoder_hidden > 0 ? channel.decoder_hidden : channel.message_dim;
    const double bound = 1.0 / std::sqrt(static_cast<double>(channel.vocab_size));
    r.decoder.resize(channel.vocab_size, width);
    detail::fill_uniform(r.decoder, bound, rng);
    if (channel.decoder_hidden > 0) {
      r.decoder_bias.resize(width);
      detail::fill_uniform(r.decoder_bias, bound, rng);
      detail::init_linear(r.decoder_out, r.decoder_out_bias, channel.message_dim, width, rng);
    }
  }
  return r;
}

template <typename Scalar>
Index Receiver<Scalar>::parameter_count() const noexcept {
  return w1.size() + b1.size() + w2.size() + b2.size() + decoder.size() + decoder_bias.size() +
         decoder_out.size() + decoder_out_bias.size();
}

// ---------------------------------------------------------------------------
// Batched passes. Row i of every matrix belongs to sample i.

template <typename Scalar>
struct SenderPass {
  Matrix<Scalar> input;
  Matrix<Scalar> logits;   ///< raw output layer (the message itself when continuous)
  Matrix<Scalar> payload;  ///< what goes over the channel
  std::optional<GumbelSample<Scalar>> gumbel;
  std::vector<Index> symbols;  ///< discrete eval / reinforce
};

/// Noise source for the discrete train pass: fresh draws from `rng`, or a
/// fixed matrix (gradient checks).
template <typename Scalar>
struct NoiseSource {
  Rng* rng = nullptr;
  const Matrix<Scalar>* fixed = nullptr;
};

template <typename Scalar>
SenderPass<Scalar> sender_forward(const Sender<Scalar>& s, const Matrix<Scalar>& input, Mode mode,
                                  NoiseSource<Scalar> noise) {
  if (input.cols() != s.input_dim()) {
    throw ShapeError("sender_forward: sender '" + s.architecture + "' expects dim " +
                     std::to_string(s.input_dim()) + ", got " + shape_of(input));
  }
  SenderPass<Scalar> p;
  p.input = input;
  p.logits = linear_forward(s.weight, s.bias, input);
  if (!s.channel.discrete()) {
    p.payload = p.logits;
    return p;
  }
  const Index n = input.rows();
  const Index vocab = s.channel.vocab_size;
  auto one_hot_at = [&](const std::vector<Index>& symbols) {
    Matrix<Scalar> m = Matrix<Scalar>::Zero(n, vocab);
    for (Index i = 0; i < n; ++i) m(i, symbols[static_cast<std::size_t>(i)]) = Scalar(1);
    return m;
  };
  if (mode == Mode::eval) {
    p.symbols.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) p.logits.row(i).maxCoeff(&p.symbols[static_cast<std::size_t>(i)]);
    p.payload = one_hot_at(p.symbols);
    return p;
  }
  if (s.channel.train_estimator == Estimator::reinforce) {
    if (noise.rng == nullptr) throw ParameterError("sender_forward: reinforce sampling needs an rng");
    const Matrix<Scalar> probs = softmax_rows(p.logits);
    p.symbols.resize(static_cast<std::size_t>(n));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Index i = 0; i < n; ++i) {
      const double r = u(*noise.rng);
      double acc = 0.0;
      Index k = vocab - 1;
      for (Index j = 0; j < vocab; ++j) {
        acc += static_cast<double>(probs(i, j));
        if (r < acc) {
          k = j;
          break;
        }
      }
      p.symbols[static_cast<std::size_t>(i)] = k;
    }
    p.payload = one_hot_at(p.symbols);
    return p;
  }
  const auto tau = static_cast<Scalar>(s.channel.gumbel_tau);
  if (noise.fixed != nullptr) {
    p.gumbel = gumbel_softmax(p.logits, *noise.fixed, tau, s.channel.straight_through);
  } else if (noise.rng != nullptr) {
    p.gumbel = gumbel_softmax_sample(p.logits, tau, *noise.rng, s.channel.straight_through);
  } else {
    throw ParameterError("sender_forward: discrete train pass needs a noise source");
  }
  p.payload = p.gumbel->sample;
  return p;
}

/// Accumulates parameter gradients into `grad` given d(loss)/d(payload).
template <typename Scalar>
void sender_backward(const Sender<Scalar>& s, const SenderPass<Scalar>& pass, const Matrix<Scalar>& grad_payload,
                     Sender<Scalar>& grad) {
  Matrix<Scalar> grad_logits;
  if (!s.channel.discrete()) {
    grad_logits = grad_payload;
  } else if (pass.gumbel) {
    grad_logits = gumbel_softmax_backward(*pass.gumbel, grad_payload);
  } else {
    throw ParameterError("sender_backward: no differentiable path through a sampled one-hot message");
  }
  auto g = linear_backward(grad_logits, pass.input, s.weight);
  grad.weight += g.weight;
  grad.bias += g.bias;
}

template <typename Scalar>
struct MapperPass {
  Matrix<Scalar> input;
  Matrix<Scalar> pre;
  Matrix<Scalar> hidden;
  Matrix<Scalar> out;
};

template <typename Scalar>
MapperPass<Scalar> mapper_forward(const Receiver<Scalar>& r, const Matrix<Scalar>& candidates) {
  if (candidates.cols() != r.input_dim()) {
    throw ShapeError("receiver_map: receiver '" + r.architecture + "' expects dim " +
                     std::to_string(r.input_dim()) + ", got " + shape_of(candidates));
  }
  MapperPass<Scalar> p;
  p.input = candidates;
  p.pre = linear_forward(r.w1, r.b1, candidates);
  p.hidden = relu(p.pre);
  p.out = linear_forward(r.w2, r.b2, p.hidden);
  return p;
}

template <typename Scalar>
void mapper_backward(const Receiver<Scalar>& r, const MapperPass<Scalar>& p, const Matrix<Scalar>& grad_out,
                     Receiver<Scalar>& grad) {
  auto g2 = linear_backward(grad_out, p.hidden, r.w2);
  grad.w2 += g2.weight;
  grad.b2 += g2.bias;
  auto g1 = linear_backward(relu_backward(g2.input, p.pre), p.input, r.w1);
  grad.w1 += g1.weight;
  grad.b1 += g1.bias;
}

template <typename Scalar>
struct DecoderPass {
  Matrix<Scalar> payload;
  Matrix<Scalar> pre;
  Matrix<Scalar> hidden;
  Matrix<Scalar> out;
};

/// Maps channel payloads to the comparison space (identity when continuous).
template <typename Scalar>
DecoderPass<Scalar> decoder_forward(const Receiver<Scalar>& r, const Matrix<Scalar>& payload) {
  DecoderPass<Scalar> p;
  p.payload = payload;
  if (!r.channel.discrete()) {
    if (payload.cols() != r.channel.message_dim) {
      throw ShapeError("receiver_message_embed: expected message dim " + std::to_string(r.channel.message_dim) +
                       ", got " + shape_of(payload));
    }
    p.out = payload;
    return p;
  }
  if (payload.cols() != r.decoder.rows()) {
    throw ShapeError("receiver_message_embed: expected vocab " + std::to_string(r.decoder.rows()) + ", got " +
                     shape_of(payload));
  }
  if (!r.decoder_has_hidden()) {
    p.out = payload * r.decoder;
    return p;
  }
  p.pre = payload * r.decoder;
  p.pre.rowwise() += r.decoder_bias.transpose();
  p.hidden = relu(p.pre);
  p.out = linear_forward(r.decoder_out, r.decoder_out_bias, p.hidden);
  return p;
}

/// Accumulates decoder gradients; returns d(loss)/d(payload).
template <typename Scalar>
Matrix<Scalar> decoder_backward(const Receiver<Scalar>& r, const DecoderPass<Scalar>& p,
                                const Matrix<Scalar>& grad_out, Receiver<Scalar>& grad) {
  if (!r.channel.discrete()) return grad_out;
  if (!r.decoder_has_hidden()) {
    grad.decoder += p.payload.transpose() * grad_out;
    return grad_out * r.decoder.transpose();
  }
  auto go = linear_backward(grad_out, p.hidden, r.decoder_out);
  grad.decoder_out += go.weight;
  grad.decoder_out_bias += go.bias;
  const Matrix<Scalar> d_pre = relu_backward(go.input, p.pre);
  grad.decoder += p.payload.transpose() * d_pre;
  grad.decoder_bias += d_pre.colwise().sum().transpose();
  return d_pre * r.decoder.transpose();
}

template <typename Scalar>
struct SelectPass {
  Matrix<Scalar> messages_unit;    ///< (rounds x m)
  Vector<Scalar> message_norms;
  Matrix<Scalar> candidates_unit;  ///< (n x m)
  Vector<Scalar> candidate_norms;
  Matrix<Scalar> logits;           ///< cos / temperature, (rounds x n)
  Scalar temperature{};
};

template <typename Scalar>
SelectPass<Scalar> select_forward(const Matrix<Scalar>& messages, const Matrix<Scalar>& mapped, double temperature) {
  if (messages.cols() != mapped.cols()) {
    throw ShapeError("select: message dim " + std::to_string(messages.cols()) + " vs mapped " + shape_of(mapped));
  }
  if (!(temperature > 0.0)) throw ParameterError("select: temperature must be > 0");
  SelectPass<Scalar> p;
  p.temperature = static_cast<Scalar>(temperature);
  p.messages_unit = normalize_rows(messages, p.message_norms);
  p.candidates_unit = normalize_rows(mapped, p.candidate_norms);
  p.logits = (p.messages_unit * p.candidates_unit.transpose()) / p.temperature;
  return p;
}

template <typename Scalar>
struct SelectGrads {
  Matrix<Scalar> messages;
  Matrix<Scalar> mapped;
};

template <typename Scalar>
SelectGrads<Scalar> select_backward(const SelectPass<Scalar>& p, const Matrix<Scalar>& grad_logits) {
  const Matrix<Scalar> g = grad_logits / p.temperature;
  SelectGrads<Scalar> out;
  out.messages = normalize_rows_backward<Scalar>(g * p.candidates_unit, p.messages_unit, p.message_norms);
  out.mapped = normalize_rows_backward<Scalar>(g.transpose() * p.messages_unit, p.candidates_unit, p.candidate_norms);
  return out;
}

// ---------------------------------------------------------------------------
// Single-message API

template <typename Scalar>
Message<Scalar> sender_encode(const Sender<Scalar>& s, const Vector<Scalar>& embedding, Mode mode, Rng& rng) {
  if (embedding.size() != s.input_dim()) {
    throw ShapeError("sender_encode: sender '" + s.architecture + "' expects dim " + std::to_string(s.input_dim()) +
                     ", got " + std::to_string(embedding.size()));
  }
  Matrix<Scalar> x = embedding.transpose();
  auto pass = sender_forward<Scalar>(s, x, mode, NoiseSource<Scalar>{&rng, nullptr});
  Message<Scalar> m;
  m.payload = pass.payload.row(0).transpose();
  if (!pass.symbols.empty()) m.symbol = pass.symbols[0];
  return m;
}

template <typename Scalar>
Vector<Scalar> receiver_message_embed(const Receiver<Scalar>& r, const Message<Scalar>& message) {
  Matrix<Scalar> p = message.payload.transpose();
  return decoder_forward(r, p).out.row(0).transpose();
}

template <typename Scalar>
Matrix<Scalar> receiver_map(const Receiver<Scalar>& r, const Matrix<Scalar>& candidates) {
  return mapper_forward(r, candidates).out;
}

/// softmax(cos(message, mapped_i) / temperature) over candidates.
template <typename Scalar>
Vector<Scalar> select(const Vector<Scalar>& message_embedding, const Matrix<Scalar>& mapped, double temperature) {
  Matrix<Scalar> m = message_embedding.transpose();
  auto p = select_forward(m, mapped, temperature);
  return softmax_rows<Scalar>(p.logits).row(0).transpose();
}

// ---------------------------------------------------------------------------
// Checkpoints: "RCK1" | u16 version | u8 role | payload (see agents.cpp).
// Byte layout is deterministic, so equal parameters give equal file hashes.

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Sender<float>& s);
std::string encode_checkpoint(const Receiver<float>& r);
Sender<float> decode_sender_checkpoint(std::string_view bytes);
Receiver<float> decode_receiver_checkpoint(std::string_view bytes);

void write_checkpoint(const Sender<float>& s, const std::filesystem::path& path);
void write_checkpoint(const Receiver<float>& r, const std::filesystem::path& path);
Sender<float> read_sender_checkpoint(const std::filesystem::path& path);
Receiver<float> read_receiver_checkpoint(const std::filesystem::path& path);

std::uint64_t checkpoint_hash(const Sender<float>& s);
std::uint64_t checkpoint_hash(const Receiver<float>& r);

const char* to_string(ChannelKind k);
const char* to_string(Estimator e);

}  // namespace refcomm

#endif  // REFCOMM_AGENTS_HPP
