#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "chordroll/midi.hpp"

namespace chordroll {

/// Binary time-step x pitch activation matrix. Rows are time steps (8 per
/// bar), columns are the 48 pitches of [C2, C6) = MIDI [36, 84).
class PianoRoll {
 public:
  static constexpr int kPitches = 48;
  static constexpr int kLowestPitch = 36;
  static constexpr int kStepsPerBar = 8;

  PianoRoll() = default;
  explicit PianoRoll(int rows) : rows_(rows), cells_(std::size_t(rows) * kPitches, 0) {}

  int rows() const { return rows_; }
  int bars() const { return (rows_ + kStepsPerBar - 1) / kStepsPerBar; }

  bool at(int row, int col) const { return cells_[std::size_t(row) * kPitches + col] != 0; }
  void set(int row, int col, bool on = true) {
    cells_[std::size_t(row) * kPitches + col] = on ? 1 : 0;
  }

  std::uint64_t active_count() const;

  bool operator==(const PianoRoll&) const = default;

 private:
  int rows_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// Rasterize a song onto the 8-steps-per-bar grid. A cell is set when a note
/// with pitch inside [36, 84) overlaps the half-open step window; pitches
/// outside the range are dropped. Rows cover ceil(song length / step) steps.
PianoRoll to_piano_roll(const Song& song);

/// Render a roll back to note events at `ticks_per_beat` resolution (4/4,
/// fixed velocity 80). Consecutive active steps of one pitch merge into a
/// single sustained note, but never across a bar boundary: every note is
/// re-articulated at the start of its bar.
Song roll_to_midi(const PianoRoll& roll, int tempo_us_per_beat, int ticks_per_beat = 480);

// Text dump, for tests and debugging and as the dataset on-disk roll format:
// header "<rows> 48", then one '0'/'1' line per row.
void save_roll_dump(const std::filesystem::path& path, const PianoRoll& roll);
PianoRoll load_roll_dump(const std::filesystem::path& path);

}  // namespace chordroll
