#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "chordroll/harmony.hpp"
#include "chordroll/neural.hpp"

namespace chordroll {

/// Chord progression model: learned chord embedding -> LSTM -> softmax over
/// the chord vocabulary (unknown id included).
struct ChordModel {
  ChordVocab vocab;
  neural::Mat W_embed;      // embed_dim x id_count
  neural::LstmParams lstm;  // input embed_dim, output id_count

  int embed_dim() const { return int(W_embed.rows()); }
  int id_count() const { return int(W_embed.cols()); }
  int hidden_size() const { return lstm.hidden_size(); }

  /// Column of W_embed for the id; one-hot multiplication collapses to this.
  neural::Vec embed(int chord_id) const;
};

ChordModel make_chord_model(const ChordVocab& vocab, int hidden, int embed_dim,
                            std::uint64_t seed);

struct ChordTrainConfig {
  double lr = 1e-5;
  int epochs = 4;
  int bptt_window = 64;
};

struct TrainStats {
  std::vector<double> epoch_mean_loss;  // mean per-step loss of each epoch
  long long adam_steps = 0;
};

/// Incremental trainer for the next-chord objective. One Adam update per
/// truncated-BPTT window; hidden state carries across windows within a song
/// and resets between songs. Embeddings train jointly with the LSTM.
class ChordTrainer {
 public:
  ChordTrainer(ChordModel& model, std::vector<std::vector<int>> corpus, ChordTrainConfig config);

  double run_epoch();  // returns the epoch's mean per-step loss
  long long adam_steps() const { return adam_.t; }

 private:
  ChordModel& model_;
  std::vector<std::vector<int>> corpus_;
  ChordTrainConfig config_;
  neural::LstmGrads grads_;
  neural::Mat embed_grad_;
  std::vector<neural::TensorRef> params_, grad_refs_;
  neural::AdamState adam_;
};

TrainStats train_chord_model(ChordModel& model, const std::vector<std::vector<int>>& corpus,
                             const ChordTrainConfig& config);

struct ChordGradients {
  neural::LstmGrads lstm;
  neural::Mat W_embed;
};

/// Mean per-step loss of one full sequence from a zero state, plus exact
/// gradients for every parameter including the embedding columns the
/// sequence touched. This is what the finite-difference checker verifies.
double chord_sequence_gradients(const ChordModel& model, const std::vector<int>& seq,
                                ChordGradients& out);

/// Teacher-forced mean per-step cross entropy over the sequences.
double chord_sequence_loss(const ChordModel& model, const std::vector<std::vector<int>>& corpus);
/// Teacher-forced argmax next-chord accuracy over the sequences.
double chord_argmax_accuracy(const ChordModel& model, const std::vector<std::vector<int>>& corpus);

struct SamplerConfig {
  double temperature = 1.0;  // 0 means exact argmax
  std::uint64_t rng_seed = 0;
};

/// Draw from q_i = p_i^(1/T) / sum_j p_j^(1/T). T=1 reproduces p, smaller T
/// sharpens, T=0 is handled as exact argmax (lowest index on ties).
int sample_with_temperature(const neural::Vec& probs, double temperature, std::mt19937_64& rng);
/// The renormalized distribution itself (exposed for tests and analysis).
neural::Vec temperature_distribution(const neural::Vec& probs, double temperature);

/// Feed the seed, then autoregressively sample `length` ids, feeding each
/// sample back. Returns only the continuation. Deterministic given weights,
/// seed ids and rng seed.
std::vector<int> generate_chords(const ChordModel& model, const std::vector<int>& seed_ids,
                                 int length, const SamplerConfig& config);

// Checkpoint kind "CHRD"; hyperparameters {id_count, embed_dim, hidden}.
// The vocabulary travels separately as a dictionary file.
void save_chord_model(const std::filesystem::path& path, ChordModel& model);
ChordModel load_chord_model(const std::filesystem::path& path, const ChordVocab& vocab);

}  // namespace chordroll
