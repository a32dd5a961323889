#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "chordroll/neural.hpp"
#include "chordroll/pianoroll.hpp"

namespace chordroll {

/// Note-level model: [roll row | current chord embedding | next chord
/// embedding | 3-bit bar counter] -> LSTM -> independent per-note sigmoid
/// probabilities for the next step.
struct PolyModel {
  int note_count = PianoRoll::kPitches;
  int embed_dim = 10;
  neural::LstmParams lstm;  // input note_count + 2*embed_dim + 3, output note_count

  int input_size() const { return note_count + 2 * embed_dim + 3; }
  int hidden_size() const { return lstm.hidden_size(); }
};

PolyModel make_poly_model(int note_count, int embed_dim, int hidden, std::uint64_t seed);

/// Concatenate roll row, both chord embeddings and the binary counter for
/// step_in_bar (0..7, most significant bit first).
neural::Vec assemble_poly_input(const neural::Vec& roll_row, const neural::Vec& chord_embed,
                                const neural::Vec& next_chord_embed, int step_in_bar);

/// One training song: a roll plus the id of the chord governing each bar.
struct PolySong {
  PianoRoll roll;
  std::vector<int> chord_ids;  // one per bar, size == roll.bars()
};

struct PolyTrainConfig {
  double lr = 1e-6;
  int epochs = 4;
  int bptt_window = 128;
};

struct PolyTrainStats {
  std::vector<double> epoch_mean_loss;  // mean per-step loss (summed over notes)
  long long adam_steps = 0;
};

/// Trainer for the next-row objective: the input at step t carries roll row
/// t plus the chord features and counter of step t+1; the target is row
/// t+1. Chord embeddings are frozen inputs here.
class PolyTrainer {
 public:
  PolyTrainer(PolyModel& model, std::vector<PolySong> songs, const neural::Mat& embeddings,
              PolyTrainConfig config);

  double run_epoch();
  long long adam_steps() const { return adam_.t; }

 private:
  PolyModel& model_;
  std::vector<PolySong> songs_;
  const neural::Mat& embeddings_;
  PolyTrainConfig config_;
  neural::LstmGrads grads_;
  std::vector<neural::TensorRef> params_, grad_refs_;
  neural::AdamState adam_;
};

PolyTrainStats train_poly_model(PolyModel& model, const std::vector<PolySong>& songs,
                                const neural::Mat& embeddings, const PolyTrainConfig& config);

/// Mean per-step loss of an arbitrary input/target sequence from a zero
/// state (inputs prebuilt with assemble_poly_input, targets binary rows).
double poly_sequence_eval(const PolyModel& model, const std::vector<neural::Vec>& inputs,
                          const std::vector<neural::Vec>& targets);
/// Same loss plus exact gradients; what the finite-difference checker
/// verifies.
double poly_sequence_gradients(const PolyModel& model, const std::vector<neural::Vec>& inputs,
                               const std::vector<neural::Vec>& targets, neural::LstmGrads& out);

/// Teacher-forced mean per-step loss over the songs.
double poly_sequence_loss(const PolyModel& model, const std::vector<PolySong>& songs,
                          const neural::Mat& embeddings);
/// Teacher-forced micro-averaged F1 of thresholded (0.5) note predictions.
double poly_f1(const PolyModel& model, const std::vector<PolySong>& songs,
               const neural::Mat& embeddings);

/// Soft cap: when the probabilities sum to s > limit, scale all of them by
/// limit/s so the sum is exactly the limit; otherwise return them unchanged.
neural::Vec cap_probabilities(const neural::Vec& probs, double limit);

/// Independent Bernoulli draw per note.
neural::Vec sample_poly_step(const neural::Vec& probs, std::mt19937_64& rng);

struct PolyGenerationConfig {
  double note_cap = 4.0;
  std::uint64_t rng_seed = 0;
};

/// Feed the seed teacher-forced, then sample 8 steps per progression bar,
/// feeding each sampled row back. The seed must cover whole bars
/// (rows == 8 * seed_chord_ids.size()); the returned roll excludes it.
PianoRoll generate_song(const PolyModel& model, const std::vector<int>& progression,
                        const neural::Mat& embeddings, const PianoRoll& seed_roll,
                        const std::vector<int>& seed_chord_ids,
                        const PolyGenerationConfig& config);

// Checkpoint kind "POLY"; hyperparameters {note_count, embed_dim, hidden}.
void save_poly_model(const std::filesystem::path& path, PolyModel& model);
PolyModel load_poly_model(const std::filesystem::path& path);

}  // namespace chordroll
