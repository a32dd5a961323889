#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "chordroll/config.hpp"
#include "chordroll/harmony.hpp"
#include "chordroll/pianoroll.hpp"

namespace chordroll {

inline constexpr int kSeedBars = 4;  // generation seed length

struct AnalyzeReport {
  CorpusStats stats;
  // over the shifted major/relative-minor songs:
  std::vector<std::pair<Chord, std::uint64_t>> chord_counts;  // descending
  std::array<std::uint64_t, 128> note_histogram{};            // per MIDI pitch

  double major_fraction() const;
};

/// Key statistics plus chord/note frequency tables for a MIDI corpus.
/// Writes report.txt, note_histogram.csv and chord_frequencies.csv to
/// config.out.
AnalyzeReport run_analyze(const PipelineConfig& config);

struct BuildResult {
  int songs = 0;
  int skipped = 0;  // unreadable, undetected, or out-of-scope scale
};

/// Filter the corpus to major/relative-minor songs, shift them to root C,
/// and write the training dataset: dictionary.txt, chords.txt, rolls.txt
/// and one roll dump per song under rolls/.
BuildResult run_build_dataset(const PipelineConfig& config);

struct Dataset {
  ChordVocab vocab;
  std::vector<std::vector<int>> chord_seqs;
  std::vector<std::filesystem::path> roll_paths;
};

Dataset load_dataset(const std::filesystem::path& dir, bool with_rolls);

void run_train_chords(const PipelineConfig& config);
void run_train_poly(const PipelineConfig& config);

struct GenerateResult {
  std::vector<int> progression;
  PianoRoll roll;
  std::filesystem::path midi_path;
};

/// Chord generation, then polyphonic generation, then MIDI export at the
/// configured tempo and instrument. Also dumps the generated roll and
/// progression next to the MIDI file. Reproducible from (config, seed).
GenerateResult run_generate(const PipelineConfig& config);

void run_export_embeddings(const PipelineConfig& config);

}  // namespace chordroll
