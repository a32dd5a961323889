#include "chordroll/harmony.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace chordroll {

namespace {

constexpr std::array<int, 7> kMajorRelMinor = {0, 2, 4, 5, 7, 9, 11};
constexpr std::array<int, 7> kHarmonicMinor = {0, 2, 3, 5, 7, 8, 11};
constexpr std::array<int, 7> kMelodicMinor = {0, 2, 3, 5, 7, 9, 11};
constexpr std::array<int, 6> kBlues = {0, 3, 5, 6, 7, 10};

constexpr std::array<const char*, 12> kNoteNames = {"C",  "C#", "D",  "D#", "E",  "F",
                                                    "F#", "G",  "G#", "A",  "A#", "B"};

std::uint16_t key_mask(ScaleType type, int root) {
  std::uint16_t mask = 0;
  for (int iv : scale_intervals(type)) mask |= std::uint16_t(1) << ((root + iv) % 12);
  return mask;
}

}  // namespace

std::span<const int> scale_intervals(ScaleType type) {
  switch (type) {
    case ScaleType::MajorRelMinor: return kMajorRelMinor;
    case ScaleType::HarmonicMinor: return kHarmonicMinor;
    case ScaleType::MelodicMinor: return kMelodicMinor;
    case ScaleType::Blues: return kBlues;
  }
  throw std::invalid_argument("unknown scale type");
}

const char* scale_name(ScaleType type) {
  switch (type) {
    case ScaleType::MajorRelMinor: return "major_rel_minor";
    case ScaleType::HarmonicMinor: return "harmonic_minor";
    case ScaleType::MelodicMinor: return "melodic_minor";
    case ScaleType::Blues: return "blues";
  }
  throw std::invalid_argument("unknown scale type");
}

std::vector<int> key_pitch_classes(ScaleType type, int root) {
  std::vector<int> pcs;
  for (int iv : scale_intervals(type)) pcs.push_back((root + iv) % 12);
  std::sort(pcs.begin(), pcs.end());
  return pcs;
}

std::uint64_t PitchClassHistogram::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

int PitchClassHistogram::nonzero_classes() const {
  int n = 0;
  for (auto c : counts) n += c > 0;
  return n;
}

Chord::Chord(std::vector<int> pitch_classes) : pcs_(std::move(pitch_classes)) {
  std::sort(pcs_.begin(), pcs_.end());
  if (pcs_.empty() || pcs_.size() > 3) throw std::invalid_argument("chord needs 1 to 3 pitch classes");
  for (std::size_t i = 0; i < pcs_.size(); ++i) {
    if (pcs_[i] < 0 || pcs_[i] > 11) throw std::invalid_argument("pitch class out of range");
    if (i > 0 && pcs_[i] == pcs_[i - 1]) throw std::invalid_argument("duplicate pitch class in chord");
  }
}

std::string Chord::label() const {
  std::string s;
  for (std::size_t i = 0; i < pcs_.size(); ++i) {
    if (i) s += '-';
    s += kNoteNames[pcs_[i]];
  }
  return s;
}

Chord major_triad(int root) {
  root = ((root % 12) + 12) % 12;
  return Chord({root, (root + 4) % 12, (root + 7) % 12});
}

int ChordVocab::encode(const Chord& chord) const {
  auto it = chord_to_id.find(chord);
  return it == chord_to_id.end() ? unknown_id : it->second;
}

int ChordVocab::encode(const std::optional<Chord>& chord) const {
  return chord ? encode(*chord) : unknown_id;
}

const Chord& ChordVocab::decode(int id) const {
  if (id < 0 || id >= size) throw std::out_of_range("chord id " + std::to_string(id) + " not in vocabulary");
  return id_to_chord[id];
}

PitchClassHistogram histogram(std::span<const NoteEvent> events) {
  PitchClassHistogram h;
  for (const auto& e : events) ++h.counts[((e.pitch % 12) + 12) % 12];
  return h;
}

std::optional<KeyEstimate> detect_key(const PitchClassHistogram& h) {
  // nonzero classes ordered by count desc, pitch class asc
  std::vector<std::pair<std::uint64_t, int>> ranked;
  for (int pc = 0; pc < 12; ++pc)
    if (h.counts[pc] > 0) ranked.emplace_back(h.counts[pc], pc);
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });

  auto top_mask = [&](std::size_t n) {
    std::uint16_t mask = 0;
    for (std::size_t i = 0; i < n; ++i) mask |= std::uint16_t(1) << ranked[i].second;
    return mask;
  };

  for (ScaleType type : kScaleTypes) {
    std::size_t need = scale_intervals(type).size();
    if (ranked.size() < need) continue;
    std::uint16_t mask = top_mask(need);
    for (int root = 0; root < 12; ++root)
      if (key_mask(type, root) == mask) return KeyEstimate{root, type};
  }
  return std::nullopt;
}

std::vector<NoteEvent> transpose(std::span<const NoteEvent> events, int shift, int* dropped) {
  std::vector<NoteEvent> out;
  out.reserve(events.size());
  int lost = 0;
  for (const auto& e : events) {
    int p = e.pitch + shift;
    if (p < 0 || p > 127) {
      ++lost;
      continue;
    }
    NoteEvent moved = e;
    moved.pitch = p;
    out.push_back(moved);
  }
  if (dropped) *dropped = lost;
  return out;
}

std::vector<std::optional<Chord>> extract_chords(const Song& song) {
  if (song.ticks_per_beat <= 0) throw std::invalid_argument("song has no tick resolution");
  const std::int64_t bar = song.bar_ticks();
  if (bar <= 0) throw std::invalid_argument("song has no bar length");

  const std::int64_t end = song.end_tick();
  const std::size_t bars = std::size_t((end + bar - 1) / bar);

  std::vector<PitchClassHistogram> per_bar(bars);
  for (const auto& e : song.events) {
    if (e.start_tick < 0) continue;
    std::size_t b = std::size_t(e.start_tick / bar);
    if (b < bars) ++per_bar[b].counts[((e.pitch % 12) + 12) % 12];
  }

  std::vector<std::optional<Chord>> chords(bars);
  for (std::size_t b = 0; b < bars; ++b) {
    std::vector<std::pair<std::uint64_t, int>> ranked;
    for (int pc = 0; pc < 12; ++pc)
      if (per_bar[b].counts[pc] > 0) ranked.emplace_back(per_bar[b].counts[pc], pc);
    if (ranked.empty()) continue;
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<int> pcs;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i)
      pcs.push_back(ranked[i].second);
    chords[b] = Chord(std::move(pcs));
  }
  return chords;
}

ChordVocab build_vocab(const std::vector<std::vector<std::optional<Chord>>>& corpus, int size) {
  if (size < 1) throw std::invalid_argument("vocabulary size must be at least 1");
  std::map<Chord, std::uint64_t> counts;
  for (const auto& song : corpus)
    for (const auto& chord : song)
      if (chord) ++counts[*chord];
  if (counts.empty()) throw std::invalid_argument("corpus contains no chords");

  std::vector<std::pair<std::uint64_t, Chord>> ranked;
  ranked.reserve(counts.size());
  for (const auto& [chord, n] : counts) ranked.emplace_back(n, chord);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });

  ChordVocab vocab;
  vocab.size = int(std::min<std::size_t>(std::size_t(size), ranked.size()));
  vocab.unknown_id = vocab.size;
  for (int id = 0; id < vocab.size; ++id) {
    vocab.id_to_chord.push_back(ranked[id].second);
    vocab.chord_to_id.emplace(ranked[id].second, id);
  }
  return vocab;
}

std::vector<int> encode_chords(const ChordVocab& vocab,
                               const std::vector<std::optional<Chord>>& chords) {
  std::vector<int> ids;
  ids.reserve(chords.size());
  for (const auto& c : chords) ids.push_back(vocab.encode(c));
  return ids;
}

void save_dictionary(const std::filesystem::path& path, const ChordVocab& vocab) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (int id = 0; id < vocab.size; ++id) {
    out << id << '\t';
    const auto& pcs = vocab.id_to_chord[id].pitch_classes();
    for (std::size_t i = 0; i < pcs.size(); ++i) {
      if (i) out << ',';
      out << pcs[i];
    }
    out << '\n';
  }
  out << vocab.unknown_id << "\tUNK\n";
}

ChordVocab load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dictionary " + path.string());
  ChordVocab vocab;
  std::string line;
  bool saw_unknown = false;
  int expected_id = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    int id;
    std::string rest;
    if (!(ls >> id) || !(ls >> rest))
      throw std::runtime_error("malformed dictionary line: " + line);
    if (saw_unknown) throw std::runtime_error("dictionary has entries after UNK");
    if (id != expected_id++) throw std::runtime_error("dictionary ids are not dense");
    if (rest == "UNK") {
      saw_unknown = true;
      continue;
    }
    std::vector<int> pcs;
    std::istringstream ps(rest);
    std::string tok;
    while (std::getline(ps, tok, ',')) pcs.push_back(std::stoi(tok));
    Chord chord(std::move(pcs));
    vocab.chord_to_id.emplace(chord, id);
    vocab.id_to_chord.push_back(chord);
  }
  if (!saw_unknown) throw std::runtime_error("dictionary missing UNK line");
  vocab.size = int(vocab.id_to_chord.size());
  vocab.unknown_id = vocab.size;
  return vocab;
}

void save_chord_corpus(const std::filesystem::path& path,
                       const std::vector<std::vector<int>>& songs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& song : songs) {
    for (std::size_t i = 0; i < song.size(); ++i) {
      if (i) out << ' ';
      out << song[i];
    }
    out << '\n';
  }
}

std::vector<std::vector<int>> load_chord_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open chord corpus " + path.string());
  std::vector<std::vector<int>> songs;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<int> ids;
    std::istringstream ls(line);
    int id;
    while (ls >> id) ids.push_back(id);
    if (!ids.empty()) songs.push_back(std::move(ids));
  }
  return songs;
}

std::uint64_t CorpusStats::detected() const {
  std::uint64_t t = 0;
  for (const auto& [type, n] : by_scale) t += n;
  return t;
}

std::uint64_t CorpusStats::count(ScaleType type) const {
  auto it = by_scale.find(type);
  return it == by_scale.end() ? 0 : it->second;
}

std::vector<std::filesystem::path> list_midi_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::exists(dir)) return files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".mid" || ext == ".midi") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.generic_string() < b.generic_string(); });
  return files;
}

CorpusStats corpus_stats(const std::filesystem::path& dir) {
  CorpusStats stats;
  for (const auto& path : list_midi_files(dir)) {
    Song song;
    try {
      song = read_midi_file(path);
    } catch (const std::exception&) {
      ++stats.unreadable;
      continue;
    }
    auto key = detect_key(histogram(song.events));
    if (key)
      ++stats.by_scale[key->scale_type];
    else
      ++stats.undetected;
  }
  return stats;
}

}  // namespace chordroll
