#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chordroll {

/// One resolved note: a matched note-on/note-off pair with absolute tick times.
struct NoteEvent {
  int pitch = 0;                 // MIDI pitch 0..127 (C2=36, C6=84)
  std::int64_t start_tick = 0;
  std::int64_t end_tick = 0;     // exclusive, > start_tick
  int velocity = 64;             // 1..127
  int channel = 0;               // 0..15

  bool operator==(const NoteEvent&) const = default;
};

struct TimeSignature {
  int numerator = 4;
  int denominator = 4;

  bool operator==(const TimeSignature&) const = default;
};

/// A parsed MIDI file reduced to what the pipeline needs: timing metadata
/// plus a single merged stream of note events sorted by start tick.
struct Song {
  int ticks_per_beat = 480;
  int tempo_us_per_beat = 500000;  // first tempo meta event, default 120 bpm
  TimeSignature time_signature{};
  std::vector<NoteEvent> events;   // sorted non-decreasing by start_tick

  /// Last tick covered by any event (0 for an empty song).
  std::int64_t end_tick() const;
  /// Ticks per bar: time-signature numerator beats.
  std::int64_t bar_ticks() const { return std::int64_t(time_signature.numerator) * ticks_per_beat; }
};

class MidiError : public std::runtime_error {
 public:
  enum class Kind { Format, Unsupported };

  MidiError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Parse a Standard MIDI File (format 0 or 1).
///
/// All tracks are merged into one event stream. Note-on with velocity 0 is
/// treated as note-off, percussion channel 9 is excluded, and note-ons left
/// open at the end of a track are closed at the track's end tick. Only the
/// first tempo and time-signature events are honored.
///
/// Throws MidiError on malformed input; format 2 files are rejected as
/// unsupported.
Song parse_midi(std::span<const std::uint8_t> bytes);

/// Serialize a Song as a format-0 SMF: tempo meta event, program change to
/// `instrument` on channel 0, then paired note-on / explicit note-off
/// messages (no running status). parse_midi(write_midi(s, p)) reproduces
/// s.events exactly for songs on non-percussion channels.
std::vector<std::uint8_t> write_midi(const Song& song, int instrument);

Song read_midi_file(const std::filesystem::path& path);
void write_midi_file(const std::filesystem::path& path, const Song& song, int instrument);

}  // namespace chordroll
