#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chordroll/midi.hpp"

namespace chordroll {

struct PitchClassHistogram {
  std::array<std::uint64_t, 12> counts{};

  std::uint64_t total() const;
  int nonzero_classes() const;
};

enum class ScaleType { MajorRelMinor, HarmonicMinor, MelodicMinor, Blues };

inline constexpr std::array<ScaleType, 4> kScaleTypes = {
    ScaleType::MajorRelMinor, ScaleType::HarmonicMinor, ScaleType::MelodicMinor, ScaleType::Blues};

/// Interval set of a scale type relative to its root.
std::span<const int> scale_intervals(ScaleType type);
const char* scale_name(ScaleType type);

/// Pitch classes of the key (root, type), sorted ascending.
std::vector<int> key_pitch_classes(ScaleType type, int root);

struct KeyEstimate {
  int root = 0;  // pitch class 0(C)..11(B)
  ScaleType scale_type = ScaleType::MajorRelMinor;

  bool operator==(const KeyEstimate&) const = default;
};

/// An unordered set of 1..3 pitch classes, stored ascending.
class Chord {
 public:
  Chord() = default;
  explicit Chord(std::vector<int> pitch_classes);
  Chord(std::initializer_list<int> pitch_classes) : Chord(std::vector<int>(pitch_classes)) {}

  const std::vector<int>& pitch_classes() const { return pcs_; }
  std::string label() const;  // note names joined with '-', e.g. "C-E-G"

  bool operator==(const Chord&) const = default;
  auto operator<=>(const Chord&) const = default;  // lexicographic on sorted pitch classes

 private:
  std::vector<int> pcs_;
};

/// Major triad on the given root, pitch classes mod 12.
Chord major_triad(int root);

/// Bidirectional chord <-> id mapping. Ids 0..size-1 are in-vocab chords in
/// descending frequency order; unknown_id == size absorbs everything else
/// (including silent bars, which have no chord).
struct ChordVocab {
  std::map<Chord, int> chord_to_id;
  std::vector<Chord> id_to_chord;
  int size = 0;
  int unknown_id = 0;

  int id_count() const { return size + 1; }  // including the unknown id
  int encode(const Chord& chord) const;
  int encode(const std::optional<Chord>& chord) const;
  const Chord& decode(int id) const;  // id must be in [0, size)
  bool is_unknown(int id) const { return id == unknown_id; }
};

/// Count one onset per note event, folded to pitch classes.
PitchClassHistogram histogram(std::span<const NoteEvent> events);

/// Match the histogram's most played pitch classes (top 7, top 6 for the
/// six-note blues scale) against the 48 key configurations. Ties between
/// matching keys resolve by scale-type priority (major/relative-minor first,
/// then harmonic minor, melodic minor, blues), then lowest root.
std::optional<KeyEstimate> detect_key(const PitchClassHistogram& h);

/// Shift every pitch by `shift` semitones, timing unchanged. Notes leaving
/// the MIDI range [0,127] are dropped; `dropped`, when given, receives the
/// count.
std::vector<NoteEvent> transpose(std::span<const NoteEvent> events, int shift,
                                 int* dropped = nullptr);

/// Per-bar chords: histogram the onsets of each bar and keep the 3 most
/// played pitch classes (fewer when the bar has fewer distinct classes,
/// nullopt for a silent bar). Count ties resolve by ascending pitch class.
std::vector<std::optional<Chord>> extract_chords(const Song& song);

/// The `size` most frequent chords of the corpus get ids 0..size-1 by
/// descending count (ties by pitch-class tuple); everything else encodes to
/// unknown_id. A corpus with fewer distinct chords yields a smaller vocab.
ChordVocab build_vocab(const std::vector<std::vector<std::optional<Chord>>>& corpus, int size);

std::vector<int> encode_chords(const ChordVocab& vocab,
                               const std::vector<std::optional<Chord>>& chords);

// Dictionary file: one line per id, "id<TAB>pc1,pc2,pc3", final line "id<TAB>UNK".
void save_dictionary(const std::filesystem::path& path, const ChordVocab& vocab);
ChordVocab load_dictionary(const std::filesystem::path& path);

// Chord corpus file: one song per line, space-separated chord ids.
void save_chord_corpus(const std::filesystem::path& path,
                       const std::vector<std::vector<int>>& songs);
std::vector<std::vector<int>> load_chord_corpus(const std::filesystem::path& path);

struct CorpusStats {
  std::map<ScaleType, std::uint64_t> by_scale;
  std::uint64_t undetected = 0;
  std::uint64_t unreadable = 0;

  std::uint64_t detected() const;
  std::uint64_t parsed() const { return detected() + undetected; }
  std::uint64_t count(ScaleType type) const;
};

/// MIDI files under `dir` (recursive, .mid/.midi), sorted for determinism.
std::vector<std::filesystem::path> list_midi_files(const std::filesystem::path& dir);

/// Detect the key of every MIDI file under `dir`; unreadable files are
/// counted and skipped.
CorpusStats corpus_stats(const std::filesystem::path& dir);

}  // namespace chordroll
