#include "chordroll/poly_model.hpp"

#include <algorithm>
#include <stdexcept>

#include "chordroll/rng.hpp"

namespace chordroll {

using neural::Mat;
using neural::Vec;

PolyModel make_poly_model(int note_count, int embed_dim, int hidden, std::uint64_t seed) {
  if (note_count <= 0 || embed_dim <= 0 || hidden <= 0)
    throw std::invalid_argument("model dimensions must be positive");
  std::mt19937_64 rng(seed);
  PolyModel model;
  model.note_count = note_count;
  model.embed_dim = embed_dim;
  model.lstm = neural::LstmParams::init(model.input_size(), hidden, note_count, rng);
  return model;
}

Vec assemble_poly_input(const Vec& roll_row, const Vec& chord_embed, const Vec& next_chord_embed,
                        int step_in_bar) {
  if (step_in_bar < 0 || step_in_bar >= PianoRoll::kStepsPerBar)
    throw std::invalid_argument("step_in_bar must be in [0,7]");
  if (chord_embed.size() != next_chord_embed.size())
    throw std::invalid_argument("chord embedding sizes differ");

  Vec x(roll_row.size() + 2 * chord_embed.size() + 3);
  Eigen::Index off = 0;
  x.segment(off, roll_row.size()) = roll_row;
  off += roll_row.size();
  x.segment(off, chord_embed.size()) = chord_embed;
  off += chord_embed.size();
  x.segment(off, next_chord_embed.size()) = next_chord_embed;
  off += next_chord_embed.size();
  x[off + 0] = (step_in_bar >> 2) & 1;  // counter, most significant bit first
  x[off + 1] = (step_in_bar >> 1) & 1;
  x[off + 2] = step_in_bar & 1;
  return x;
}

namespace {

Vec roll_row_vec(const PianoRoll& roll, int row) {
  Vec v(PianoRoll::kPitches);
  for (int c = 0; c < PianoRoll::kPitches; ++c) v[c] = roll.at(row, c) ? 1.0 : 0.0;
  return v;
}

void validate_songs(const PolyModel& model, const std::vector<PolySong>& songs,
                    const Mat& embeddings) {
  if (model.note_count != PianoRoll::kPitches)
    throw std::invalid_argument("model note count does not match the piano-roll width");
  if (int(embeddings.rows()) != model.embed_dim)
    throw std::invalid_argument("embedding dimension does not match the model");
  bool has_step = false;
  for (const auto& song : songs) {
    if (int(song.chord_ids.size()) != song.roll.bars())
      throw std::invalid_argument("chord sequence length does not match roll bars");
    for (int id : song.chord_ids)
      if (id < 0 || id >= int(embeddings.cols()))
        throw std::invalid_argument("chord id outside the embedding table");
    if (song.roll.rows() >= 2) has_step = true;
  }
  if (!has_step) throw std::invalid_argument("no song with at least two roll steps");
}

// Chord features for predicting row `row`: the chord governing that row and
// the chord of the following bar (last chord repeated at song end).
struct ChordFeatures {
  int chord_id;
  int next_chord_id;
};

ChordFeatures chord_features(const std::vector<int>& chord_ids, int row) {
  int bar = row / PianoRoll::kStepsPerBar;
  int last = int(chord_ids.size()) - 1;
  return {chord_ids[std::min(bar, last)], chord_ids[std::min(bar + 1, last)]};
}

Vec training_input(const PolySong& song, const Mat& embeddings, int t) {
  auto feat = chord_features(song.chord_ids, t + 1);
  return assemble_poly_input(roll_row_vec(song.roll, t), embeddings.col(feat.chord_id),
                             embeddings.col(feat.next_chord_id),
                             (t + 1) % PianoRoll::kStepsPerBar);
}

}  // namespace

PolyTrainer::PolyTrainer(PolyModel& model, std::vector<PolySong> songs, const Mat& embeddings,
                         PolyTrainConfig config)
    : model_(model),
      songs_(std::move(songs)),
      embeddings_(embeddings),
      config_(config),
      grads_(neural::LstmGrads::zero_like(model.lstm)) {
  if (config_.bptt_window < 1) throw std::invalid_argument("bptt window must be positive");
  validate_songs(model_, songs_, embeddings_);
  params_ = neural::tensor_refs(model_.lstm);
  grad_refs_ = neural::tensor_refs(grads_);
  adam_ = neural::make_adam(params_, {config_.lr, 0.9, 0.999, 1e-8});
}

double PolyTrainer::run_epoch() {
  double loss_sum = 0.0;
  std::size_t step_count = 0;

  for (const auto& song : songs_) {
    if (song.roll.rows() < 2) continue;
    auto state = neural::LstmState::zero(model_.hidden_size());
    const std::size_t transitions = std::size_t(song.roll.rows()) - 1;

    for (std::size_t start = 0; start < transitions; start += std::size_t(config_.bptt_window)) {
      const std::size_t window = std::min(std::size_t(config_.bptt_window), transitions - start);
      std::vector<neural::LstmStepCache> caches(window);
      std::vector<Vec> dz(window);

      for (std::size_t k = 0; k < window; ++k) {
        const int t = int(start + k);
        Vec z = neural::lstm_step(model_.lstm, state, training_input(song, embeddings_, t),
                                  &caches[k]);
        Vec p = neural::sigmoid(z);
        Vec target = roll_row_vec(song.roll, t + 1);
        loss_sum += neural::cross_entropy_binary(p, target);
        dz[k] = (p - target) / double(window);  // window loss is the per-step mean
      }

      grads_.set_zero();
      neural::lstm_backward(model_.lstm, caches, dz, grads_);
      neural::adam_update(params_, grad_refs_, adam_);
      step_count += window;
    }
  }
  return loss_sum / double(step_count);
}

PolyTrainStats train_poly_model(PolyModel& model, const std::vector<PolySong>& songs,
                                const Mat& embeddings, const PolyTrainConfig& config) {
  PolyTrainer trainer(model, songs, embeddings, config);
  PolyTrainStats stats;
  for (int e = 0; e < config.epochs; ++e) stats.epoch_mean_loss.push_back(trainer.run_epoch());
  stats.adam_steps = trainer.adam_steps();
  return stats;
}

namespace {

void validate_io_sequence(const PolyModel& model, const std::vector<Vec>& inputs,
                          const std::vector<Vec>& targets) {
  if (inputs.empty() || inputs.size() != targets.size())
    throw std::invalid_argument("inputs and targets must be non-empty and equally long");
  for (const auto& x : inputs)
    if (x.size() != model.input_size()) throw std::invalid_argument("input width mismatch");
  for (const auto& t : targets)
    if (t.size() != model.note_count) throw std::invalid_argument("target width mismatch");
}

}  // namespace

double poly_sequence_eval(const PolyModel& model, const std::vector<Vec>& inputs,
                          const std::vector<Vec>& targets) {
  validate_io_sequence(model, inputs, targets);
  auto state = neural::LstmState::zero(model.hidden_size());
  double loss = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Vec z = neural::lstm_step(model.lstm, state, inputs[t]);
    loss += neural::cross_entropy_binary(neural::sigmoid(z), targets[t]);
  }
  return loss / double(inputs.size());
}

double poly_sequence_gradients(const PolyModel& model, const std::vector<Vec>& inputs,
                               const std::vector<Vec>& targets, neural::LstmGrads& out) {
  validate_io_sequence(model, inputs, targets);
  const std::size_t window = inputs.size();
  out = neural::LstmGrads::zero_like(model.lstm);

  auto state = neural::LstmState::zero(model.hidden_size());
  std::vector<neural::LstmStepCache> caches(window);
  std::vector<Vec> dz(window);
  double loss = 0.0;
  for (std::size_t t = 0; t < window; ++t) {
    Vec z = neural::lstm_step(model.lstm, state, inputs[t], &caches[t]);
    Vec p = neural::sigmoid(z);
    loss += neural::cross_entropy_binary(p, targets[t]);
    dz[t] = (p - targets[t]) / double(window);
  }
  neural::lstm_backward(model.lstm, caches, dz, out);
  return loss / double(window);
}

double poly_sequence_loss(const PolyModel& model, const std::vector<PolySong>& songs,
                          const Mat& embeddings) {
  validate_songs(model, songs, embeddings);
  double loss = 0.0;
  std::size_t steps = 0;
  for (const auto& song : songs) {
    if (song.roll.rows() < 2) continue;
    auto state = neural::LstmState::zero(model.hidden_size());
    for (int t = 0; t + 1 < song.roll.rows(); ++t) {
      Vec z = neural::lstm_step(model.lstm, state, training_input(song, embeddings, t));
      loss += neural::cross_entropy_binary(neural::sigmoid(z), roll_row_vec(song.roll, t + 1));
      ++steps;
    }
  }
  return loss / double(steps);
}

double poly_f1(const PolyModel& model, const std::vector<PolySong>& songs, const Mat& embeddings) {
  validate_songs(model, songs, embeddings);
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (const auto& song : songs) {
    if (song.roll.rows() < 2) continue;
    auto state = neural::LstmState::zero(model.hidden_size());
    for (int t = 0; t + 1 < song.roll.rows(); ++t) {
      Vec z = neural::lstm_step(model.lstm, state, training_input(song, embeddings, t));
      Vec p = neural::sigmoid(z);
      for (int c = 0; c < model.note_count; ++c) {
        bool predicted = p[c] >= 0.5;
        bool actual = song.roll.at(t + 1, c);
        tp += predicted && actual;
        fp += predicted && !actual;
        fn += !predicted && actual;
      }
    }
  }
  double denom = double(2 * tp + fp + fn);
  return denom == 0.0 ? 1.0 : 2.0 * double(tp) / denom;
}

Vec cap_probabilities(const Vec& probs, double limit) {
  if (limit <= 0.0) throw std::invalid_argument("note cap must be positive");
  double s = probs.sum();
  if (s <= limit) return probs;
  return probs * (limit / s);
}

Vec sample_poly_step(const Vec& probs, std::mt19937_64& rng) {
  Vec out(probs.size());
  for (Eigen::Index k = 0; k < probs.size(); ++k)
    out[k] = uniform_double(rng) < probs[k] ? 1.0 : 0.0;
  return out;
}

PianoRoll generate_song(const PolyModel& model, const std::vector<int>& progression,
                        const Mat& embeddings, const PianoRoll& seed_roll,
                        const std::vector<int>& seed_chord_ids,
                        const PolyGenerationConfig& config) {
  if (model.note_count != PianoRoll::kPitches)
    throw std::invalid_argument("model note count does not match the piano-roll width");
  if (progression.empty()) throw std::invalid_argument("progression must not be empty");
  if (seed_roll.rows() == 0 ||
      seed_roll.rows() != int(seed_chord_ids.size()) * PianoRoll::kStepsPerBar)
    throw std::invalid_argument("seed roll must cover exactly its chords' bars");
  if (int(embeddings.rows()) != model.embed_dim)
    throw std::invalid_argument("embedding dimension does not match the model");
  auto check_ids = [&](const std::vector<int>& ids) {
    for (int id : ids)
      if (id < 0 || id >= int(embeddings.cols()))
        throw std::invalid_argument("chord id outside the embedding table");
  };
  check_ids(progression);
  check_ids(seed_chord_ids);

  const int seed_rows = seed_roll.rows();
  const int total_rows = seed_rows + int(progression.size()) * PianoRoll::kStepsPerBar;

  // chord features of an absolute row: seed chords first, then the progression
  auto features_at = [&](int row) {
    int bar = row / PianoRoll::kStepsPerBar;
    int seed_bars = int(seed_chord_ids.size());
    int last_bar = seed_bars + int(progression.size()) - 1;
    auto chord_of_bar = [&](int b) {
      b = std::min(b, last_bar);
      return b < seed_bars ? seed_chord_ids[b] : progression[b - seed_bars];
    };
    return ChordFeatures{chord_of_bar(bar), chord_of_bar(bar + 1)};
  };
  auto input_for = [&](const Vec& row_t, int predicted_row) {
    auto feat = features_at(predicted_row);
    return assemble_poly_input(row_t, embeddings.col(feat.chord_id),
                               embeddings.col(feat.next_chord_id),
                               predicted_row % PianoRoll::kStepsPerBar);
  };

  auto state = neural::LstmState::zero(model.hidden_size());
  Vec z;
  for (int t = 0; t < seed_rows; ++t)
    z = neural::lstm_step(model.lstm, state, input_for(roll_row_vec(seed_roll, t), t + 1));

  std::mt19937_64 rng(config.rng_seed);
  PianoRoll out(total_rows - seed_rows);
  for (int row = seed_rows; row < total_rows; ++row) {
    Vec y = cap_probabilities(neural::sigmoid(z), config.note_cap);
    Vec sampled = sample_poly_step(y, rng);
    for (int c = 0; c < PianoRoll::kPitches; ++c)
      if (sampled[c] != 0.0) out.set(row - seed_rows, c);
    if (row + 1 < total_rows) z = neural::lstm_step(model.lstm, state, input_for(sampled, row + 1));
  }
  return out;
}

void save_poly_model(const std::filesystem::path& path, PolyModel& model) {
  neural::save_checkpoint(path, "POLY",
                          {std::uint32_t(model.note_count), std::uint32_t(model.embed_dim),
                           std::uint32_t(model.hidden_size())},
                          neural::tensor_refs(model.lstm));
}

PolyModel load_poly_model(const std::filesystem::path& path) {
  auto ckpt = neural::load_checkpoint(path);
  if (ckpt.kind != "POLY")
    throw std::runtime_error(path.string() + " is not a polyphonic model checkpoint (kind " +
                             ckpt.kind + ")");
  if (ckpt.hyper.size() != 3)
    throw std::runtime_error("polyphonic checkpoint has malformed hyperparameters");
  PolyModel model = make_poly_model(int(ckpt.hyper[0]), int(ckpt.hyper[1]), int(ckpt.hyper[2]), 0);
  neural::restore_tensors(ckpt, neural::tensor_refs(model.lstm));
  return model;
}

}  // namespace chordroll
