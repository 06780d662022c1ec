#include "cmsa/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cmsa/error.hpp"
#include "cmsa/rng.hpp"

namespace cmsa::nn {

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::Stacked: return "stacked";
    case Variant::Attention: return "attention";
    case Variant::Pooling: return "pooling";
  }
  return "stacked";
}

std::optional<Variant> parse_variant(std::string_view s) noexcept {
  if (s == "stacked" || s == "model-a") return Variant::Stacked;
  if (s == "attention" || s == "model-b") return Variant::Attention;
  if (s == "pooling" || s == "model-c") return Variant::Pooling;
  return std::nullopt;
}

std::size_t summary_width(Variant v, const Dims& d) noexcept {
  return v == Variant::Pooling ? 4 * d.hidden : 2 * d.hidden;
}

LstmParams LstmParams::zeros(std::size_t input, std::size_t hidden) {
  LstmParams p;
  p.input = input;
  p.hidden = hidden;
  for (std::size_t g = 0; g < 4; ++g) {
    p.W[g] = Tensor(hidden, input);
    p.U[g] = Tensor(hidden, hidden);
    p.b[g] = Tensor(hidden, 1);
  }
  return p;
}

ModelParams ModelParams::zeros(Variant variant, const Dims& dims) {
  if (dims.input == 0 || dims.hidden == 0 || dims.layers == 0) {
    throw ShapeError("model dimensions must be positive");
  }
  if (variant == Variant::Stacked && dims.layers < 2) {
    throw ShapeError("a stacked model needs at least two Bi-LSTM layers");
  }
  if (variant == Variant::Attention && dims.attention == 0) {
    throw ShapeError("attention width must be positive");
  }
  ModelParams p;
  p.variant = variant;
  p.dims = dims;
  for (std::size_t l = 0; l < dims.layers; ++l) {
    const std::size_t in = l == 0 ? dims.input : 2 * dims.hidden;
    p.layers.push_back({LstmParams::zeros(in, dims.hidden), LstmParams::zeros(in, dims.hidden)});
  }
  if (variant == Variant::Attention) {
    p.attention = AttentionParams{Tensor(dims.attention, 2 * dims.hidden),
                                  Tensor(dims.attention, 1), Tensor(dims.attention, 1)};
  }
  const std::size_t k = summary_width(variant, dims);
  p.head_W = Tensor(kNumClasses, k);
  p.head_b = Tensor(kNumClasses, 1);
  return p;
}

namespace {

template <typename Params, typename F>
void visit_params(Params& p, F&& f) {
  std::string name;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (int dir = 0; dir < 2; ++dir) {
      auto& cell = dir == 0 ? p.layers[l].forward : p.layers[l].backward;
      const std::string prefix =
          "layers." + std::to_string(l) + (dir == 0 ? ".fwd." : ".bwd.");
      for (std::size_t g = 0; g < 4; ++g) {
        const std::string gate(kGateNames[g]);
        f(prefix + "W_" + gate, std::span(cell.W[g].data));
        f(prefix + "U_" + gate, std::span(cell.U[g].data));
        f(prefix + "b_" + gate, std::span(cell.b[g].data));
      }
    }
  }
  if (p.attention) {
    f(std::string("attention.W"), std::span(p.attention->W.data));
    f(std::string("attention.b"), std::span(p.attention->b.data));
    f(std::string("attention.v"), std::span(p.attention->v.data));
  }
  f(std::string("head.W"), std::span(p.head_W.data));
  f(std::string("head.b"), std::span(p.head_b.data));
  if (p.embedding) f(std::string("embedding"), p.embedding->data());
}

}  // namespace

void ModelParams::for_each(
    const std::function<void(std::string_view, std::span<double>)>& f) {
  visit_params(*this, [&](const std::string& n, std::span<double> s) { f(n, s); });
}

void ModelParams::for_each(
    const std::function<void(std::string_view, std::span<const double>)>& f) const {
  visit_params(*this, [&](const std::string& n, auto s) { f(n, std::span<const double>(s)); });
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](std::string_view, std::span<const double> s) { n += s.size(); });
  return n;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.for_each([](std::string_view, std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); });
  return z;
}

ModelParams init_params(Variant variant, const Dims& dims, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(variant, dims);
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
  auto fill = [&](Tensor& t) {
    for (auto& v : t.data) v = rng.uniform(-scale, scale);
  };
  for (auto& layer : p.layers) {
    for (auto* cell : {&layer.forward, &layer.backward}) {
      for (std::size_t g = 0; g < 4; ++g) {
        fill(cell->W[g]);
        fill(cell->U[g]);
      }
      std::fill(cell->b[kForget].data.begin(), cell->b[kForget].data.end(), 1.0);
    }
  }
  if (p.attention) {
    fill(p.attention->W);
    fill(p.attention->v);
  }
  fill(p.head_W);
  return p;
}

std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> out(z.size());
  if (z.empty()) return out;
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// y += A x
void gemv_add(const Tensor& A, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < A.rows; ++r) {
    const double* a = A.data.data() + r * A.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < A.cols; ++c) acc += a[c] * x[c];
    y[r] += acc;
  }
}

// y += A^T x
void gemv_t_add(const Tensor& A, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < A.rows; ++r) {
    const double* a = A.data.data() + r * A.cols;
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (std::size_t c = 0; c < A.cols; ++c) y[c] += a[c] * xr;
  }
}

// A += x y^T
void ger_add(Tensor& A, std::span<const double> x, std::span<const double> y) {
  for (std::size_t r = 0; r < A.rows; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    double* a = A.data.data() + r * A.cols;
    for (std::size_t c = 0; c < A.cols; ++c) a[c] += xr * y[c];
  }
}

void check_cell_shapes(std::span<const double> x, std::span<const double> h_prev,
                       std::span<const double> c_prev, const LstmParams& p) {
  if (x.size() != p.input || h_prev.size() != p.hidden || c_prev.size() != p.hidden) {
    throw ShapeError("lstm_step: expected x[" + std::to_string(p.input) + "], h/c[" +
                     std::to_string(p.hidden) + "], got x[" + std::to_string(x.size()) +
                     "], h[" + std::to_string(h_prev.size()) + "], c[" +
                     std::to_string(c_prev.size()) + "]");
  }
}

}  // namespace

LstmStepCache lstm_step_cached(std::span<const double> x, std::span<const double> h_prev,
                               std::span<const double> c_prev, const LstmParams& p) {
  check_cell_shapes(x, h_prev, c_prev, p);
  const std::size_t h = p.hidden;
  LstmStepCache s;
  s.x.assign(x.begin(), x.end());
  s.h_prev.assign(h_prev.begin(), h_prev.end());
  s.c_prev.assign(c_prev.begin(), c_prev.end());
  for (std::size_t g = 0; g < 4; ++g) {
    auto& z = s.gate[g];
    z.assign(p.b[g].data.begin(), p.b[g].data.end());
    gemv_add(p.W[g], x, z);
    gemv_add(p.U[g], h_prev, z);
    for (auto& v : z) v = g == kCell ? std::tanh(v) : sigmoid(v);
  }
  s.c.resize(h);
  s.tanh_c.resize(h);
  s.h.resize(h);
  for (std::size_t j = 0; j < h; ++j) {
    s.c[j] = s.gate[kForget][j] * c_prev[j] + s.gate[kInput][j] * s.gate[kCell][j];
    s.tanh_c[j] = std::tanh(s.c[j]);
    s.h[j] = s.gate[kOutput][j] * s.tanh_c[j];
  }
  return s;
}

LstmState lstm_step(std::span<const double> x, std::span<const double> h_prev,
                    std::span<const double> c_prev, const LstmParams& p) {
  auto s = lstm_step_cached(x, h_prev, c_prev, p);
  return {std::move(s.h), std::move(s.c)};
}

void lstm_step_backward(const LstmStepCache& s, std::span<const double> dh,
                        std::span<const double> dc_next, const LstmParams& p,
                        LstmParams& grad, std::span<double> dx, std::span<double> dh_prev,
                        std::span<double> dc_prev) {
  const std::size_t h = p.hidden;
  std::array<std::vector<double>, 4> dz;
  for (auto& v : dz) v.assign(h, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    const double i = s.gate[kInput][j], f = s.gate[kForget][j];
    const double o = s.gate[kOutput][j], g = s.gate[kCell][j];
    const double dout = dh[j] * s.tanh_c[j];
    const double dc = dc_next[j] + dh[j] * o * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
    dz[kInput][j] = dc * g * i * (1.0 - i);
    dz[kForget][j] = dc * s.c_prev[j] * f * (1.0 - f);
    dz[kOutput][j] = dout * o * (1.0 - o);
    dz[kCell][j] = dc * i * (1.0 - g * g);
    dc_prev[j] = dc * f;
  }
  std::fill(dx.begin(), dx.end(), 0.0);
  std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
  for (std::size_t g = 0; g < 4; ++g) {
    ger_add(grad.W[g], dz[g], s.x);
    ger_add(grad.U[g], dz[g], s.h_prev);
    for (std::size_t j = 0; j < h; ++j) grad.b[g].data[j] += dz[g][j];
    gemv_t_add(p.W[g], dz[g], dx);
    gemv_t_add(p.U[g], dz[g], dh_prev);
  }
}

namespace {

// Valid rows only: T x width.
struct LayerTrace {
  std::vector<LstmStepCache> fwd;  // indexed by position
  std::vector<LstmStepCache> bwd;  // indexed by position
  Tensor out;                      // T x 2h
};

LayerTrace run_layer(const Tensor& in, const BiLstmLayer& layer) {
  const std::size_t T = in.rows;
  const std::size_t h = layer.forward.hidden;
  if (in.cols != layer.forward.input || layer.backward.input != layer.forward.input ||
      layer.backward.hidden != h) {
    throw ShapeError("Bi-LSTM layer expects input width " + std::to_string(layer.forward.input) +
                     ", got " + std::to_string(in.cols));
  }
  LayerTrace tr;
  tr.out = Tensor(T, 2 * h);
  tr.fwd.resize(T);
  tr.bwd.resize(T);
  std::vector<double> hs(h, 0.0), cs(h, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    tr.fwd[t] = lstm_step_cached(in.row(t), hs, cs, layer.forward);
    hs = tr.fwd[t].h;
    cs = tr.fwd[t].c;
    std::copy(hs.begin(), hs.end(), tr.out.row(t).begin());
  }
  std::fill(hs.begin(), hs.end(), 0.0);
  std::fill(cs.begin(), cs.end(), 0.0);
  for (std::size_t t = T; t-- > 0;) {
    tr.bwd[t] = lstm_step_cached(in.row(t), hs, cs, layer.backward);
    hs = tr.bwd[t].h;
    cs = tr.bwd[t].c;
    std::copy(hs.begin(), hs.end(), tr.out.row(t).begin() + static_cast<std::ptrdiff_t>(h));
  }
  return tr;
}

// Returns d(loss)/d(input), T x input width.
Tensor backprop_layer(const LayerTrace& tr, const Tensor& d_out, const BiLstmLayer& layer,
                      BiLstmLayer& grad) {
  const std::size_t T = d_out.rows;
  const std::size_t h = layer.forward.hidden;
  Tensor d_in(T, layer.forward.input);
  std::vector<double> dh(h), dh_next(h, 0.0), dc_next(h, 0.0), dh_prev(h), dc_prev(h);
  std::vector<double> dx(layer.forward.input);
  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t j = 0; j < h; ++j) dh[j] = d_out(t, j) + dh_next[j];
    lstm_step_backward(tr.fwd[t], dh, dc_next, layer.forward, grad.forward, dx, dh_prev, dc_prev);
    for (std::size_t c = 0; c < dx.size(); ++c) d_in(t, c) += dx[c];
    dh_next.swap(dh_prev);
    dc_next.swap(dc_prev);
  }
  std::fill(dh_next.begin(), dh_next.end(), 0.0);
  std::fill(dc_next.begin(), dc_next.end(), 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < h; ++j) dh[j] = d_out(t, h + j) + dh_next[j];
    lstm_step_backward(tr.bwd[t], dh, dc_next, layer.backward, grad.backward, dx, dh_prev,
                       dc_prev);
    for (std::size_t c = 0; c < dx.size(); ++c) d_in(t, c) += dx[c];
    dh_next.swap(dh_prev);
    dc_next.swap(dc_prev);
  }
  return d_in;
}

Tensor input_rows(const textrep::EmbeddedSequence& seq, const ModelParams& p) {
  const std::size_t T = seq.length;
  if (p.embedding) {
    if (seq.ids.size() < T) throw ShapeError("sequence lacks piece ids for embedding lookup");
    Tensor x(T, p.embedding->dim());
    for (std::size_t t = 0; t < T; ++t) {
      if (seq.ids[t] >= p.embedding->rows()) throw ShapeError("piece id out of embedding range");
      const auto row = p.embedding->row(seq.ids[t]);
      std::copy(row.begin(), row.end(), x.row(t).begin());
    }
    return x;
  }
  if (seq.values.size() < T * seq.dim) throw ShapeError("sequence values too short");
  Tensor x(T, seq.dim);
  std::copy_n(seq.values.begin(), T * seq.dim, x.data.begin());
  return x;
}

struct Encoded {
  std::vector<LayerTrace> layers;
  std::vector<Tensor> inputs;  // input of each layer
};

Encoded encode(const textrep::EmbeddedSequence& seq, const ModelParams& p) {
  if (seq.length == 0) throw ShapeError("cannot classify an empty sequence");
  if (seq.length > seq.max_len && !p.embedding) throw ShapeError("sequence length exceeds T_max");
  Encoded e;
  e.inputs.push_back(input_rows(seq, p));
  if (e.inputs[0].cols != p.dims.input) {
    throw ShapeError("input width " + std::to_string(e.inputs[0].cols) +
                     " does not match model input " + std::to_string(p.dims.input));
  }
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    e.layers.push_back(run_layer(e.inputs.back(), p.layers[l]));
    if (l + 1 < p.layers.size()) e.inputs.push_back(e.layers.back().out);
  }
  return e;
}

struct AttentionTrace {
  Tensor u;  // T x a, tanh(W h_t + b)
  std::vector<double> alpha;
};

struct HeadTrace {
  std::vector<double> summary;
  std::vector<double> logits;
  std::vector<std::size_t> argmax;  // pooling only
  AttentionTrace attn;
};

HeadTrace summarize(const Tensor& H, const ModelParams& p) {
  const std::size_t T = H.rows;
  const std::size_t h = p.dims.hidden;
  HeadTrace tr;
  switch (p.variant) {
    case Variant::Stacked: {
      tr.summary.resize(2 * h);
      for (std::size_t j = 0; j < h; ++j) {
        tr.summary[j] = H(T - 1, j);
        tr.summary[h + j] = H(0, h + j);
      }
      break;
    }
    case Variant::Attention: {
      const auto& a = *p.attention;
      const std::size_t aw = a.W.rows;
      tr.attn.u = Tensor(T, aw);
      std::vector<double> scores(T);
      for (std::size_t t = 0; t < T; ++t) {
        auto u = tr.attn.u.row(t);
        std::copy(a.b.data.begin(), a.b.data.end(), u.begin());
        gemv_add(a.W, H.row(t), u);
        double e = 0.0;
        for (std::size_t k = 0; k < aw; ++k) {
          u[k] = std::tanh(u[k]);
          e += a.v.data[k] * u[k];
        }
        scores[t] = e;
      }
      tr.attn.alpha = softmax(scores);
      tr.summary.assign(2 * h, 0.0);
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < 2 * h; ++j) tr.summary[j] += tr.attn.alpha[t] * H(t, j);
      }
      break;
    }
    case Variant::Pooling: {
      tr.summary.assign(4 * h, 0.0);
      tr.argmax.assign(2 * h, 0);
      for (std::size_t j = 0; j < 2 * h; ++j) {
        double best = H(0, j);
        double sum = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
          if (H(t, j) > best) {
            best = H(t, j);
            tr.argmax[j] = t;
          }
          sum += H(t, j);
        }
        tr.summary[j] = best;
        tr.summary[2 * h + j] = sum / static_cast<double>(T);
      }
      break;
    }
  }
  tr.logits.assign(p.head_b.data.begin(), p.head_b.data.end());
  gemv_add(p.head_W, tr.summary, tr.logits);
  return tr;
}

// d(loss)/dH given d(loss)/d(summary).
Tensor summary_backward(const Tensor& H, const HeadTrace& tr, std::span<const double> ds,
                        const ModelParams& p, ModelParams& grad) {
  const std::size_t T = H.rows;
  const std::size_t h = p.dims.hidden;
  Tensor dH(T, 2 * h);
  switch (p.variant) {
    case Variant::Stacked:
      for (std::size_t j = 0; j < h; ++j) {
        dH(T - 1, j) += ds[j];
        dH(0, h + j) += ds[h + j];
      }
      break;
    case Variant::Attention: {
      const auto& a = *p.attention;
      auto& ga = *grad.attention;
      const std::size_t aw = a.W.rows;
      std::vector<double> dalpha(T, 0.0);
      double weighted = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < 2 * h; ++j) {
          dalpha[t] += ds[j] * H(t, j);
          dH(t, j) += tr.attn.alpha[t] * ds[j];
        }
        weighted += tr.attn.alpha[t] * dalpha[t];
      }
      std::vector<double> dpre(aw);
      for (std::size_t t = 0; t < T; ++t) {
        const double de = tr.attn.alpha[t] * (dalpha[t] - weighted);
        const auto u = tr.attn.u.row(t);
        for (std::size_t k = 0; k < aw; ++k) {
          ga.v.data[k] += de * u[k];
          dpre[k] = de * a.v.data[k] * (1.0 - u[k] * u[k]);
          ga.b.data[k] += dpre[k];
        }
        ger_add(ga.W, dpre, H.row(t));
        gemv_t_add(a.W, dpre, dH.row(t));
      }
      break;
    }
    case Variant::Pooling:
      for (std::size_t j = 0; j < 2 * h; ++j) {
        dH(tr.argmax[j], j) += ds[j];
        const double share = ds[2 * h + j] / static_cast<double>(T);
        for (std::size_t t = 0; t < T; ++t) dH(t, j) += share;
      }
      break;
  }
  return dH;
}

ClassProbs to_probs(const std::vector<double>& logits) {
  const auto p = softmax(logits);
  return {p[0], p[1], p[2]};
}

}  // namespace

Tensor bilstm_forward(const textrep::EmbeddedSequence& seq, const BiLstmLayer& layer) {
  if (seq.dim != layer.forward.input) {
    throw ShapeError("bilstm_forward: sequence width " + std::to_string(seq.dim) +
                     " != layer input " + std::to_string(layer.forward.input));
  }
  const std::size_t h = layer.forward.hidden;
  Tensor out(seq.max_len, 2 * h);
  if (seq.length == 0) return out;
  Tensor in(seq.length, seq.dim);
  std::copy_n(seq.values.begin(), seq.length * seq.dim, in.data.begin());
  const auto tr = run_layer(in, layer);
  std::copy(tr.out.data.begin(), tr.out.data.end(), out.data.begin());
  return out;
}

ForwardResult forward(const textrep::EmbeddedSequence& seq, const ModelParams& params) {
  const auto enc = encode(seq, params);
  const auto head = summarize(enc.layers.back().out, params);
  ForwardResult r;
  r.probs = to_probs(head.logits);
  if (params.variant == Variant::Attention) {
    r.attention = head.attn.alpha;
    r.attention.resize(seq.max_len, 0.0);
  }
  return r;
}

ClassProbs forward_stacked(const textrep::EmbeddedSequence& seq, const ModelParams& params) {
  if (params.variant != Variant::Stacked) throw ShapeError("forward_stacked: wrong variant");
  return forward(seq, params).probs;
}

ForwardResult forward_attention(const textrep::EmbeddedSequence& seq, const ModelParams& params) {
  if (params.variant != Variant::Attention) throw ShapeError("forward_attention: wrong variant");
  return forward(seq, params);
}

ClassProbs forward_pooling(const textrep::EmbeddedSequence& seq, const ModelParams& params) {
  if (params.variant != Variant::Pooling) throw ShapeError("forward_pooling: wrong variant");
  return forward(seq, params).probs;
}

double loss_and_gradient(const textrep::EmbeddedSequence& seq, Label gold,
                         const ModelParams& params, ModelParams& grad) {
  const auto enc = encode(seq, params);
  const Tensor& H = enc.layers.back().out;
  const auto head = summarize(H, params);

  const double m = *std::max_element(head.logits.begin(), head.logits.end());
  double z = 0.0;
  for (double v : head.logits) z += std::exp(v - m);
  const double log_z = m + std::log(z);
  const double loss = log_z - head.logits[index_of(gold)];

  std::vector<double> dlogits(kNumClasses);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    dlogits[c] = std::exp(head.logits[c] - log_z) - (c == index_of(gold) ? 1.0 : 0.0);
  }
  ger_add(grad.head_W, dlogits, head.summary);
  for (std::size_t c = 0; c < kNumClasses; ++c) grad.head_b.data[c] += dlogits[c];
  std::vector<double> ds(head.summary.size(), 0.0);
  gemv_t_add(params.head_W, dlogits, ds);

  Tensor d = summary_backward(H, head, ds, params, grad);
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    d = backprop_layer(enc.layers[l], d, params.layers[l], grad.layers[l]);
  }
  if (params.embedding && grad.embedding) {
    for (std::size_t t = 0; t < seq.length; ++t) {
      auto row = grad.embedding->row(seq.ids[t]);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += d(t, c);
    }
  }
  return loss;
}

Dims dims_for(Variant variant, std::size_t input_dim, const TrainConfig& cfg) {
  Dims d;
  d.input = input_dim;
  d.hidden = cfg.hidden;
  d.layers = variant == Variant::Stacked ? cfg.layers : cfg.encoder_layers;
  d.attention = variant == Variant::Attention ? cfg.attention_width : 0;
  return d;
}

double mean_loss(std::span<const LabeledSequence> data, const ModelParams& params) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : data) {
    const auto r = forward(ex.seq, params);
    total -= std::log(std::max(r.probs[index_of(ex.label)], std::numeric_limits<double>::min()));
  }
  return total / static_cast<double>(data.size());
}

namespace {

std::vector<double*> flat_pointers(ModelParams& p) {
  std::vector<double*> out;
  p.for_each([&](std::string_view, std::span<double> s) {
    for (auto& v : s) out.push_back(&v);
  });
  return out;
}

}  // namespace

TrainResult train(Variant variant, std::span<const LabeledSequence> train_set,
                  std::span<const LabeledSequence> val_set, const TrainConfig& cfg,
                  const textrep::EmbeddingTable* embedding) {
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (cfg.batch_size == 0 || cfg.epochs == 0 || cfg.hidden == 0) {
    throw std::invalid_argument("train: batch size, epochs and hidden size must be positive");
  }
  const std::size_t input_dim = cfg.train_embeddings && embedding ? embedding->dim()
                                                                   : train_set.front().seq.dim;
  ModelParams params = init_params(variant, dims_for(variant, input_dim, cfg),
                                   derive_seed(cfg.seed, 1));
  if (cfg.train_embeddings) {
    if (!embedding) throw std::invalid_argument("train: train_embeddings needs a table");
    params.embedding = *embedding;
    params.embedding->set_trainable(true);
  }

  ModelParams grad = params.zeros_like();
  auto param_ptrs = flat_pointers(params);
  auto grad_ptrs = flat_pointers(grad);
  const std::size_t n_params = param_ptrs.size();
  std::vector<double> m(n_params, 0.0), v(n_params, 0.0);

  Rng shuffle_rng(derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.params = params;
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t step = 0;
  std::size_t batch_index = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (double* g : grad_ptrs) *g = 0.0;
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = train_set[order[i]];
        batch_loss += loss_and_gradient(ex.seq, ex.label, params, grad);
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index));
      }
      epoch_loss += batch_loss;
      const double inv = 1.0 / static_cast<double>(end - start);
      double norm_sq = 0.0;
      for (double* g : grad_ptrs) {
        *g *= inv;
        norm_sq += *g * *g;
      }
      const double norm = std::sqrt(norm_sq);
      const double clip = cfg.clip_norm > 0 && norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < n_params; ++k) {
        const double g = *grad_ptrs[k] * clip;
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
        const double mhat = m[k] / c1;
        const double vhat = v[k] / c2;
        *param_ptrs[k] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
      }
    }
    const double train_loss = epoch_loss / static_cast<double>(train_set.size());
    const double val_loss = val_set.empty() ? train_loss : mean_loss(val_set, params);
    if (!std::isfinite(val_loss)) {
      throw TrainingError("non-finite validation loss after epoch " + std::to_string(epoch));
    }
    result.history.train_loss.push_back(train_loss);
    result.history.val_loss.push_back(val_loss);
    if (val_loss < best) {
      best = val_loss;
      since_best = 0;
      result.params = params;
      result.history.best_epoch = epoch;
    } else if (++since_best >= cfg.patience) {
      result.history.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace cmsa::nn
