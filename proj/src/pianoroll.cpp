#include "chordroll/pianoroll.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

namespace chordroll {

std::uint64_t PianoRoll::active_count() const {
  std::uint64_t n = 0;
  for (auto c : cells_) n += c;
  return n;
}

PianoRoll to_piano_roll(const Song& song) {
  if (song.ticks_per_beat <= 0) throw std::invalid_argument("song has no tick resolution");
  const std::int64_t bar = song.bar_ticks();
  if (bar <= 0) throw std::invalid_argument("song has no bar length");

  const std::int64_t end = song.end_tick();
  // step window t is [t*bar/8, (t+1)*bar/8); comparisons stay in integers
  const std::int64_t rows = (end * PianoRoll::kStepsPerBar + bar - 1) / bar;
  PianoRoll roll{int(rows)};

  for (const auto& e : song.events) {
    int col = e.pitch - PianoRoll::kLowestPitch;
    if (col < 0 || col >= PianoRoll::kPitches) continue;
    if (e.start_tick < 0 || e.end_tick <= e.start_tick) continue;
    std::int64_t first = e.start_tick * PianoRoll::kStepsPerBar / bar;
    std::int64_t last = (e.end_tick * PianoRoll::kStepsPerBar + bar - 1) / bar - 1;
    for (std::int64_t t = first; t <= last && t < rows; ++t) roll.set(int(t), col);
  }
  return roll;
}

Song roll_to_midi(const PianoRoll& roll, int tempo_us_per_beat, int ticks_per_beat) {
  if (ticks_per_beat <= 0 || ticks_per_beat % 2 != 0)
    throw std::invalid_argument("ticks_per_beat must be positive and even");

  Song song;
  song.ticks_per_beat = ticks_per_beat;
  song.tempo_us_per_beat = tempo_us_per_beat;
  song.time_signature = {4, 4};
  const std::int64_t step = song.bar_ticks() / PianoRoll::kStepsPerBar;

  for (int col = 0; col < PianoRoll::kPitches; ++col) {
    int row = 0;
    while (row < roll.rows()) {
      if (!roll.at(row, col)) {
        ++row;
        continue;
      }
      int start = row;
      int bar_end = (row / PianoRoll::kStepsPerBar + 1) * PianoRoll::kStepsPerBar;
      while (row + 1 < roll.rows() && row + 1 < bar_end && roll.at(row + 1, col)) ++row;
      NoteEvent ev;
      ev.pitch = col + PianoRoll::kLowestPitch;
      ev.start_tick = start * step;
      ev.end_tick = (row + 1) * step;
      ev.velocity = 80;
      ev.channel = 0;
      song.events.push_back(ev);
      ++row;
    }
  }
  std::sort(song.events.begin(), song.events.end(), [](const NoteEvent& a, const NoteEvent& b) {
    return std::tie(a.start_tick, a.pitch) < std::tie(b.start_tick, b.pitch);
  });
  return song;
}

void save_roll_dump(const std::filesystem::path& path, const PianoRoll& roll) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << roll.rows() << ' ' << PianoRoll::kPitches << '\n';
  for (int r = 0; r < roll.rows(); ++r) {
    std::string line(PianoRoll::kPitches, '0');
    for (int c = 0; c < PianoRoll::kPitches; ++c)
      if (roll.at(r, c)) line[c] = '1';
    out << line << '\n';
  }
}

PianoRoll load_roll_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open roll dump " + path.string());
  int rows = 0, cols = 0;
  if (!(in >> rows >> cols) || cols != PianoRoll::kPitches || rows < 0)
    throw std::runtime_error("malformed roll dump header in " + path.string());
  PianoRoll roll(rows);
  std::string line;
  std::getline(in, line);  // rest of header line
  for (int r = 0; r < rows; ++r) {
    if (!std::getline(in, line) || int(line.size()) < cols)
      throw std::runtime_error("truncated roll dump " + path.string());
    for (int c = 0; c < cols; ++c) {
      if (line[c] == '1')
        roll.set(r, c);
      else if (line[c] != '0')
        throw std::runtime_error("invalid roll dump cell in " + path.string());
    }
  }
  return roll;
}

}  // namespace chordroll
