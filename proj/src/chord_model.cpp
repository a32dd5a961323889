#include "chordroll/chord_model.hpp"

#include <cmath>
#include <stdexcept>

#include "chordroll/rng.hpp"

namespace chordroll {

using neural::Mat;
using neural::Vec;

neural::Vec ChordModel::embed(int chord_id) const {
  if (chord_id < 0 || chord_id >= id_count())
    throw std::out_of_range("chord id " + std::to_string(chord_id) + " outside embedding table");
  return W_embed.col(chord_id);
}

ChordModel make_chord_model(const ChordVocab& vocab, int hidden, int embed_dim,
                            std::uint64_t seed) {
  if (hidden <= 0 || embed_dim <= 0) throw std::invalid_argument("model dimensions must be positive");
  std::mt19937_64 rng(seed);
  ChordModel model;
  model.vocab = vocab;
  const int ids = vocab.id_count();
  model.W_embed = Mat(embed_dim, ids);
  for (Eigen::Index c = 0; c < model.W_embed.cols(); ++c)
    for (Eigen::Index r = 0; r < model.W_embed.rows(); ++r)
      model.W_embed(r, c) = uniform_in(rng, -0.08, 0.08);
  model.lstm = neural::LstmParams::init(embed_dim, hidden, ids, rng);
  return model;
}

namespace {

void validate_corpus(const std::vector<std::vector<int>>& corpus, int id_count) {
  bool has_step = false;
  for (const auto& seq : corpus) {
    if (seq.size() >= 2) has_step = true;
    for (int id : seq)
      if (id < 0 || id >= id_count)
        throw std::invalid_argument("chord id " + std::to_string(id) + " outside vocabulary");
  }
  if (!has_step)
    throw std::invalid_argument("chord corpus has no sequence with at least two chords");
}

}  // namespace

ChordTrainer::ChordTrainer(ChordModel& model, std::vector<std::vector<int>> corpus,
                           ChordTrainConfig config)
    : model_(model),
      corpus_(std::move(corpus)),
      config_(config),
      grads_(neural::LstmGrads::zero_like(model.lstm)),
      embed_grad_(Mat::Zero(model.W_embed.rows(), model.W_embed.cols())) {
  if (config_.bptt_window < 1) throw std::invalid_argument("bptt window must be positive");
  validate_corpus(corpus_, model_.id_count());
  params_ = neural::tensor_refs(model_.lstm);
  params_.push_back(neural::tensor_ref("W_embed", model_.W_embed));
  grad_refs_ = neural::tensor_refs(grads_);
  grad_refs_.push_back(neural::tensor_ref("W_embed", embed_grad_));
  adam_ = neural::make_adam(params_, {config_.lr, 0.9, 0.999, 1e-8});
}

double ChordTrainer::run_epoch() {
  double loss_sum = 0.0;
  std::size_t step_count = 0;

  for (const auto& seq : corpus_) {
    if (seq.size() < 2) continue;
    auto state = neural::LstmState::zero(model_.hidden_size());
    const std::size_t transitions = seq.size() - 1;

    for (std::size_t start = 0; start < transitions; start += std::size_t(config_.bptt_window)) {
      const std::size_t window = std::min(std::size_t(config_.bptt_window), transitions - start);
      std::vector<neural::LstmStepCache> caches(window);
      std::vector<Vec> dz(window);

      for (std::size_t k = 0; k < window; ++k) {
        const std::size_t t = start + k;
        Vec z = neural::lstm_step(model_.lstm, state, model_.W_embed.col(seq[t]), &caches[k]);
        caches[k].embed_id = seq[t];
        Vec p = neural::softmax(z);
        loss_sum += neural::cross_entropy_categorical(p, seq[t + 1]);
        p[seq[t + 1]] -= 1.0;   // d loss / d z for softmax + cross entropy
        dz[k] = p / double(window);  // window loss is the per-step mean
      }

      grads_.set_zero();
      embed_grad_.setZero();
      std::vector<Vec> dx;
      neural::lstm_backward(model_.lstm, caches, dz, grads_, &dx);
      for (std::size_t k = 0; k < window; ++k) embed_grad_.col(caches[k].embed_id) += dx[k];
      neural::adam_update(params_, grad_refs_, adam_);
      step_count += window;
    }
  }
  return loss_sum / double(step_count);
}

TrainStats train_chord_model(ChordModel& model, const std::vector<std::vector<int>>& corpus,
                             const ChordTrainConfig& config) {
  ChordTrainer trainer(model, corpus, config);
  TrainStats stats;
  for (int e = 0; e < config.epochs; ++e) stats.epoch_mean_loss.push_back(trainer.run_epoch());
  stats.adam_steps = trainer.adam_steps();
  return stats;
}

double chord_sequence_gradients(const ChordModel& model, const std::vector<int>& seq,
                                ChordGradients& out) {
  validate_corpus({seq}, model.id_count());
  const std::size_t window = seq.size() - 1;
  out.lstm = neural::LstmGrads::zero_like(model.lstm);
  out.W_embed = Mat::Zero(model.W_embed.rows(), model.W_embed.cols());

  auto state = neural::LstmState::zero(model.hidden_size());
  std::vector<neural::LstmStepCache> caches(window);
  std::vector<Vec> dz(window);
  double loss = 0.0;
  for (std::size_t t = 0; t < window; ++t) {
    Vec z = neural::lstm_step(model.lstm, state, model.W_embed.col(seq[t]), &caches[t]);
    caches[t].embed_id = seq[t];
    Vec p = neural::softmax(z);
    loss += neural::cross_entropy_categorical(p, seq[t + 1]);
    p[seq[t + 1]] -= 1.0;
    dz[t] = p / double(window);
  }
  std::vector<Vec> dx;
  neural::lstm_backward(model.lstm, caches, dz, out.lstm, &dx);
  for (std::size_t t = 0; t < window; ++t) out.W_embed.col(caches[t].embed_id) += dx[t];
  return loss / double(window);
}

double chord_sequence_loss(const ChordModel& model, const std::vector<std::vector<int>>& corpus) {
  validate_corpus(corpus, model.id_count());
  double loss = 0.0;
  std::size_t steps = 0;
  for (const auto& seq : corpus) {
    if (seq.size() < 2) continue;
    auto state = neural::LstmState::zero(model.hidden_size());
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
      Vec z = neural::lstm_step(model.lstm, state, model.W_embed.col(seq[t]));
      loss += neural::cross_entropy_categorical(neural::softmax(z), seq[t + 1]);
      ++steps;
    }
  }
  return loss / double(steps);
}

double chord_argmax_accuracy(const ChordModel& model, const std::vector<std::vector<int>>& corpus) {
  validate_corpus(corpus, model.id_count());
  std::size_t hits = 0, steps = 0;
  for (const auto& seq : corpus) {
    if (seq.size() < 2) continue;
    auto state = neural::LstmState::zero(model.hidden_size());
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
      Vec z = neural::lstm_step(model.lstm, state, model.W_embed.col(seq[t]));
      Eigen::Index best;
      z.maxCoeff(&best);  // softmax is monotone, argmax of z suffices
      hits += best == seq[t + 1];
      ++steps;
    }
  }
  return double(hits) / double(steps);
}

Vec temperature_distribution(const neural::Vec& probs, double temperature) {
  if (temperature < 0.0) throw std::invalid_argument("temperature must be non-negative");
  if (temperature == 0.0) {
    Eigen::Index best;
    probs.maxCoeff(&best);
    Vec q = Vec::Zero(probs.size());
    q[best] = 1.0;
    return q;
  }
  // p^(1/T) renormalized, computed through logs for stability
  Vec logs(probs.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    logs[k] = probs[k] > 0.0 ? std::log(probs[k]) / temperature
                             : -std::numeric_limits<double>::infinity();
    mx = std::max(mx, logs[k]);
  }
  Vec q(probs.size());
  double sum = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    q[k] = std::isinf(logs[k]) ? 0.0 : std::exp(logs[k] - mx);
    sum += q[k];
  }
  return q / sum;
}

int sample_with_temperature(const neural::Vec& probs, double temperature, std::mt19937_64& rng) {
  if (probs.size() == 0) throw std::invalid_argument("empty probability vector");
  if (temperature == 0.0) {
    Eigen::Index best;
    probs.maxCoeff(&best);
    return int(best);
  }
  Vec q = temperature_distribution(probs, temperature);
  double u = uniform_double(rng);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    acc += q[k];
    if (u < acc) return int(k);
  }
  return int(q.size() - 1);  // rounding slack
}

std::vector<int> generate_chords(const ChordModel& model, const std::vector<int>& seed_ids,
                                 int length, const SamplerConfig& config) {
  if (seed_ids.empty()) throw std::invalid_argument("chord generation needs a non-empty seed");
  if (length < 0) throw std::invalid_argument("length must be non-negative");
  for (int id : seed_ids)
    if (id < 0 || id >= model.id_count())
      throw std::invalid_argument("seed chord id outside vocabulary");

  auto state = neural::LstmState::zero(model.hidden_size());
  Vec z;
  for (int id : seed_ids) z = neural::lstm_step(model.lstm, state, model.W_embed.col(id));

  std::mt19937_64 rng(config.rng_seed);
  std::vector<int> out;
  out.reserve(std::size_t(length));
  for (int k = 0; k < length; ++k) {
    int id = sample_with_temperature(neural::softmax(z), config.temperature, rng);
    out.push_back(id);
    z = neural::lstm_step(model.lstm, state, model.W_embed.col(id));
  }
  return out;
}

void save_chord_model(const std::filesystem::path& path, ChordModel& model) {
  auto tensors = neural::tensor_refs(model.lstm);
  tensors.push_back(neural::tensor_ref("W_embed", model.W_embed));
  neural::save_checkpoint(path, "CHRD",
                          {std::uint32_t(model.id_count()), std::uint32_t(model.embed_dim()),
                           std::uint32_t(model.hidden_size())},
                          tensors);
}

ChordModel load_chord_model(const std::filesystem::path& path, const ChordVocab& vocab) {
  auto ckpt = neural::load_checkpoint(path);
  if (ckpt.kind != "CHRD")
    throw std::runtime_error(path.string() + " is not a chord model checkpoint (kind " +
                             ckpt.kind + ")");
  if (ckpt.hyper.size() != 3) throw std::runtime_error("chord checkpoint has malformed hyperparameters");
  const int ids = int(ckpt.hyper[0]), embed_dim = int(ckpt.hyper[1]), hidden = int(ckpt.hyper[2]);
  if (ids != vocab.id_count())
    throw std::runtime_error("checkpoint vocabulary size " + std::to_string(ids) +
                             " does not match dictionary (" + std::to_string(vocab.id_count()) + ")");
  ChordModel model = make_chord_model(vocab, hidden, embed_dim, 0);
  auto tensors = neural::tensor_refs(model.lstm);
  tensors.push_back(neural::tensor_ref("W_embed", model.W_embed));
  neural::restore_tensors(ckpt, tensors);
  return model;
}

}  // namespace chordroll
