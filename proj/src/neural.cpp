#include "chordroll/neural.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "chordroll/rng.hpp"

namespace chordroll::neural {

namespace {

constexpr double kProbFloor = 1e-12;

double clamp_prob(double p) {
  return std::min(1.0 - kProbFloor, std::max(kProbFloor, p));
}

void fill_uniform(Mat& m, std::mt19937_64& rng, double scale) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = uniform_in(rng, -scale, scale);
}

}  // namespace

Vec sigmoid(const Vec& z) {
  return ((-z.array()).exp() + 1.0).inverse().matrix();
}

Vec softmax(const Vec& z) {
  Eigen::ArrayXd e = (z.array() - z.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

double cross_entropy_categorical(const Vec& probs, int target) {
  if (target < 0 || target >= probs.size())
    throw std::out_of_range("cross entropy target out of range");
  return -std::log(clamp_prob(probs[target]));
}

double cross_entropy_binary(const Vec& probs, const Vec& targets) {
  if (probs.size() != targets.size())
    throw std::invalid_argument("binary cross entropy size mismatch");
  double loss = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    double p = clamp_prob(probs[k]);
    loss -= targets[k] * std::log(p) + (1.0 - targets[k]) * std::log(1.0 - p);
  }
  return loss;
}

LstmParams LstmParams::init(int input, int hidden, int output, std::mt19937_64& rng, double scale,
                            double forget_bias) {
  if (input <= 0 || hidden <= 0 || output <= 0)
    throw std::invalid_argument("lstm dimensions must be positive");
  LstmParams p;
  p.U_i = Mat(hidden, input);
  p.U_f = Mat(hidden, input);
  p.U_o = Mat(hidden, input);
  p.U_g = Mat(hidden, input);
  p.V_i = Mat(hidden, hidden);
  p.V_f = Mat(hidden, hidden);
  p.V_o = Mat(hidden, hidden);
  p.V_g = Mat(hidden, hidden);
  for (Mat* m : {&p.U_i, &p.U_f, &p.U_o, &p.U_g, &p.V_i, &p.V_f, &p.V_o, &p.V_g})
    fill_uniform(*m, rng, scale);
  p.b_i = Vec::Zero(hidden);
  p.b_f = Vec::Constant(hidden, forget_bias);
  p.b_o = Vec::Zero(hidden);
  p.b_g = Vec::Zero(hidden);
  p.W_out = Mat(output, hidden);
  fill_uniform(p.W_out, rng, scale);
  p.b_out = Vec::Zero(output);
  return p;
}

LstmState LstmState::zero(int hidden) {
  return {Vec::Zero(hidden), Vec::Zero(hidden)};
}

Vec lstm_step(const LstmParams& p, LstmState& state, const Vec& x, LstmStepCache* cache) {
  if (x.size() != p.input_size()) throw std::invalid_argument("lstm input size mismatch");
  if (state.h.size() != p.hidden_size() || state.c.size() != p.hidden_size())
    throw std::invalid_argument("lstm state size mismatch");

  Vec i = sigmoid(p.U_i * x + p.V_i * state.h + p.b_i);
  Vec f = sigmoid(p.U_f * x + p.V_f * state.h + p.b_f);
  Vec o = sigmoid(p.U_o * x + p.V_o * state.h + p.b_o);
  Vec g = (p.U_g * x + p.V_g * state.h + p.b_g).array().tanh().matrix();
  Vec c = f.cwiseProduct(state.c) + i.cwiseProduct(g);
  Vec tanh_c = c.array().tanh().matrix();
  Vec h = o.cwiseProduct(tanh_c);

  if (cache) {
    cache->x = x;
    cache->h_prev = state.h;
    cache->c_prev = state.c;
    cache->i = i;
    cache->f = f;
    cache->o = o;
    cache->g = g;
    cache->c = c;
    cache->tanh_c = tanh_c;
    cache->h = h;
  }
  state.h = h;
  state.c = std::move(c);
  return p.W_out * state.h + p.b_out;
}

LstmGrads LstmGrads::zero_like(const LstmParams& p) {
  LstmGrads g;
  int in = p.input_size(), hid = p.hidden_size(), out = p.output_size();
  g.U_i = Mat::Zero(hid, in);
  g.U_f = Mat::Zero(hid, in);
  g.U_o = Mat::Zero(hid, in);
  g.U_g = Mat::Zero(hid, in);
  g.V_i = Mat::Zero(hid, hid);
  g.V_f = Mat::Zero(hid, hid);
  g.V_o = Mat::Zero(hid, hid);
  g.V_g = Mat::Zero(hid, hid);
  g.b_i = Vec::Zero(hid);
  g.b_f = Vec::Zero(hid);
  g.b_o = Vec::Zero(hid);
  g.b_g = Vec::Zero(hid);
  g.W_out = Mat::Zero(out, hid);
  g.b_out = Vec::Zero(out);
  return g;
}

void LstmGrads::set_zero() {
  for (Mat* m : {&U_i, &U_f, &U_o, &U_g, &V_i, &V_f, &V_o, &V_g, &W_out}) m->setZero();
  for (Vec* v : {&b_i, &b_f, &b_o, &b_g, &b_out}) v->setZero();
}

void lstm_backward(const LstmParams& p, std::span<const LstmStepCache> steps,
                   std::span<const Vec> dz, LstmGrads& grads, std::vector<Vec>* dx) {
  if (steps.size() != dz.size()) throw std::invalid_argument("bptt: steps and dz length mismatch");
  const int hidden = p.hidden_size();
  if (dx) dx->assign(steps.size(), Vec());

  Vec dh_next = Vec::Zero(hidden);
  Vec dc_next = Vec::Zero(hidden);
  for (std::ptrdiff_t t = std::ptrdiff_t(steps.size()) - 1; t >= 0; --t) {
    const LstmStepCache& s = steps[t];

    grads.W_out.noalias() += dz[t] * s.h.transpose();
    grads.b_out += dz[t];

    Vec dh = p.W_out.transpose() * dz[t] + dh_next;
    Vec dc = dh.cwiseProduct(s.o).cwiseProduct((1.0 - s.tanh_c.array().square()).matrix()) + dc_next;

    Vec da_o = dh.cwiseProduct(s.tanh_c).cwiseProduct(s.o).cwiseProduct((1.0 - s.o.array()).matrix());
    Vec da_f = dc.cwiseProduct(s.c_prev).cwiseProduct(s.f).cwiseProduct((1.0 - s.f.array()).matrix());
    Vec da_i = dc.cwiseProduct(s.g).cwiseProduct(s.i).cwiseProduct((1.0 - s.i.array()).matrix());
    Vec da_g = dc.cwiseProduct(s.i).cwiseProduct((1.0 - s.g.array().square()).matrix());

    grads.U_i.noalias() += da_i * s.x.transpose();
    grads.U_f.noalias() += da_f * s.x.transpose();
    grads.U_o.noalias() += da_o * s.x.transpose();
    grads.U_g.noalias() += da_g * s.x.transpose();
    grads.V_i.noalias() += da_i * s.h_prev.transpose();
    grads.V_f.noalias() += da_f * s.h_prev.transpose();
    grads.V_o.noalias() += da_o * s.h_prev.transpose();
    grads.V_g.noalias() += da_g * s.h_prev.transpose();
    grads.b_i += da_i;
    grads.b_f += da_f;
    grads.b_o += da_o;
    grads.b_g += da_g;

    if (dx)
      (*dx)[t] = p.U_i.transpose() * da_i + p.U_f.transpose() * da_f + p.U_o.transpose() * da_o +
                 p.U_g.transpose() * da_g;

    dh_next = p.V_i.transpose() * da_i + p.V_f.transpose() * da_f + p.V_o.transpose() * da_o +
              p.V_g.transpose() * da_g;
    dc_next = dc.cwiseProduct(s.f);
  }
}

TensorRef tensor_ref(const std::string& name, Mat& m) {
  return {name, m.data(), m.rows(), m.cols()};
}

TensorRef tensor_ref(const std::string& name, Vec& v) {
  return {name, v.data(), v.size(), 1};
}

std::vector<TensorRef> tensor_refs(LstmParams& p, const std::string& prefix) {
  return {
      tensor_ref(prefix + "U_i", p.U_i),     tensor_ref(prefix + "U_f", p.U_f),
      tensor_ref(prefix + "U_o", p.U_o),     tensor_ref(prefix + "U_g", p.U_g),
      tensor_ref(prefix + "V_i", p.V_i),     tensor_ref(prefix + "V_f", p.V_f),
      tensor_ref(prefix + "V_o", p.V_o),     tensor_ref(prefix + "V_g", p.V_g),
      tensor_ref(prefix + "b_i", p.b_i),     tensor_ref(prefix + "b_f", p.b_f),
      tensor_ref(prefix + "b_o", p.b_o),     tensor_ref(prefix + "b_g", p.b_g),
      tensor_ref(prefix + "W_out", p.W_out), tensor_ref(prefix + "b_out", p.b_out),
  };
}

std::vector<TensorRef> tensor_refs(LstmGrads& g, const std::string& prefix) {
  return {
      tensor_ref(prefix + "U_i", g.U_i),     tensor_ref(prefix + "U_f", g.U_f),
      tensor_ref(prefix + "U_o", g.U_o),     tensor_ref(prefix + "U_g", g.U_g),
      tensor_ref(prefix + "V_i", g.V_i),     tensor_ref(prefix + "V_f", g.V_f),
      tensor_ref(prefix + "V_o", g.V_o),     tensor_ref(prefix + "V_g", g.V_g),
      tensor_ref(prefix + "b_i", g.b_i),     tensor_ref(prefix + "b_f", g.b_f),
      tensor_ref(prefix + "b_o", g.b_o),     tensor_ref(prefix + "b_g", g.b_g),
      tensor_ref(prefix + "W_out", g.W_out), tensor_ref(prefix + "b_out", g.b_out),
  };
}

AdamState make_adam(const std::vector<TensorRef>& params, AdamConfig config) {
  std::size_t total = 0;
  for (const auto& p : params) total += std::size_t(p.size());
  AdamState adam;
  adam.config = config;
  adam.m.assign(total, 0.0);
  adam.v.assign(total, 0.0);
  return adam;
}

void adam_update(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
                 AdamState& adam) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam: params/grads mismatch");
  ++adam.t;
  const double b1 = adam.config.beta1, b2 = adam.config.beta2;
  const double corr1 = 1.0 - std::pow(b1, double(adam.t));
  const double corr2 = 1.0 - std::pow(b2, double(adam.t));
  std::size_t off = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size())
      throw std::invalid_argument("adam: tensor shape mismatch at " + params[k].name);
    double* w = params[k].data;
    const double* g = grads[k].data;
    for (Eigen::Index j = 0; j < params[k].size(); ++j, ++off) {
      if (off >= adam.m.size()) throw std::invalid_argument("adam: state smaller than parameters");
      adam.m[off] = b1 * adam.m[off] + (1.0 - b1) * g[j];
      adam.v[off] = b2 * adam.v[off] + (1.0 - b2) * g[j] * g[j];
      double m_hat = adam.m[off] / corr1;
      double v_hat = adam.v[off] / corr2;
      w[j] -= adam.config.lr * m_hat / (std::sqrt(v_hat) + adam.config.epsilon);
    }
  }
  if (off != adam.m.size()) throw std::invalid_argument("adam: state larger than parameters");
}

GradCheckResult gradient_check(const std::vector<TensorRef>& params,
                               const std::vector<TensorRef>& analytic,
                               const std::function<double()>& loss, double epsilon) {
  if (params.size() != analytic.size())
    throw std::invalid_argument("gradient check: params/analytic mismatch");
  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index j = 0; j < params[k].size(); ++j) {
      double saved = params[k].data[j];
      params[k].data[j] = saved + epsilon;
      double up = loss();
      params[k].data[j] = saved - epsilon;
      double down = loss();
      params[k].data[j] = saved;
      double numeric = (up - down) / (2.0 * epsilon);
      double a = analytic[k].data[j];
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_tensor = params[k].name;
        result.worst_index = j;
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'J', 'M', 'B', 'T'};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {char(v & 0xff), char(v >> 8 & 0xff), char(v >> 16 & 0xff), char(v >> 24 & 0xff)};
  out.write(b, 4);
}

void put_f64(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = char(bits >> (8 * i) & 0xff);
  out.write(b, 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("truncated checkpoint");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw std::runtime_error("truncated checkpoint");
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = bits << 8 | b[i];
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const std::vector<std::uint32_t>& hyper,
                     const std::vector<TensorRef>& tensors) {
  if (kind.size() != 4) throw std::invalid_argument("model kind tag must be 4 characters");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());

  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  out.write(kind.data(), 4);
  put_u32(out, std::uint32_t(hyper.size()));
  for (auto h : hyper) put_u32(out, h);
  put_u32(out, std::uint32_t(tensors.size()));
  for (const auto& t : tensors) {
    put_u32(out, std::uint32_t(t.name.size()));
    out.write(t.name.data(), std::streamsize(t.name.size()));
    put_u32(out, std::uint32_t(t.rows));
    put_u32(out, std::uint32_t(t.cols));
    // memory is column-major, file is row-major
    for (Eigen::Index r = 0; r < t.rows; ++r)
      for (Eigen::Index c = 0; c < t.cols; ++c) put_f64(out, t.data[c * t.rows + r]);
  }
  if (!out) throw std::runtime_error("write failure on checkpoint " + path.string());
}

const Mat& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return m;
  throw std::runtime_error("checkpoint has no tensor named " + name);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());

  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic))
    throw std::runtime_error("not a model checkpoint: " + path.string());
  std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  char kind[4];
  if (!in.read(kind, 4)) throw std::runtime_error("truncated checkpoint");
  ckpt.kind.assign(kind, 4);

  std::uint32_t n_hyper = get_u32(in);
  for (std::uint32_t i = 0; i < n_hyper; ++i) ckpt.hyper.push_back(get_u32(in));

  std::uint32_t n_tensors = get_u32(in);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw std::runtime_error("truncated checkpoint");
    std::uint32_t rows = get_u32(in);
    std::uint32_t cols = get_u32(in);
    Mat m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = get_f64(in);
    ckpt.tensors.emplace_back(std::move(name), std::move(m));
  }
  return ckpt;
}

void restore_tensors(const Checkpoint& ckpt, const std::vector<TensorRef>& refs) {
  for (const auto& ref : refs) {
    const Mat& m = ckpt.tensor(ref.name);
    if (m.rows() != ref.rows || m.cols() != ref.cols)
      throw std::runtime_error("checkpoint tensor " + ref.name + " has unexpected shape");
    for (Eigen::Index c = 0; c < ref.cols; ++c)
      for (Eigen::Index r = 0; r < ref.rows; ++r) ref.data[c * ref.rows + r] = m(r, c);
  }
}

}  // namespace chordroll::neural
