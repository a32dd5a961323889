#include "chordroll/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "chordroll/chord_model.hpp"
#include "chordroll/pca.hpp"
#include "chordroll/poly_model.hpp"
#include "chordroll/rng.hpp"

namespace chordroll {

namespace fs = std::filesystem;

namespace {

// Constant shift with pitch-class effect -root, smallest magnitude.
int shift_to_c(int root) { return root <= 6 ? -root : 12 - root; }

void ensure_dir(const fs::path& dir) { fs::create_directories(dir); }

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void require_file(const fs::path& path, const char* what, const char* flag) {
  if (path.empty())
    throw std::invalid_argument(std::string(what) + " required; pass " + flag);
  if (!fs::exists(path))
    throw std::invalid_argument(std::string(what) + " not found: " + path.string());
}

ChordVocab dictionary_beside(const fs::path& checkpoint) {
  fs::path dict = checkpoint.parent_path() / "dictionary.txt";
  if (!fs::exists(dict))
    throw std::runtime_error("no dictionary.txt next to checkpoint " + checkpoint.string());
  return load_dictionary(dict);
}

}  // namespace

void write_effective_config(const fs::path& path, const PipelineConfig& c) {
  auto out = open_out(path);
  out.precision(17);
  out << "# effective configuration\n";
  out << "vocab-size = " << c.vocab_size << '\n';
  out << "embed-dim = " << c.embed_dim << '\n';
  out << "chord-hidden = " << c.chord_hidden << '\n';
  out << "poly-hidden = " << c.poly_hidden << '\n';
  out << "chord-lr = " << c.chord_lr << '\n';
  out << "poly-lr = " << c.poly_lr << '\n';
  out << "epochs = " << c.epochs << '\n';
  out << "chord-bptt = " << c.chord_bptt << '\n';
  out << "poly-bptt = " << c.poly_bptt << '\n';
  out << "temperature = " << c.temperature << '\n';
  out << "note-cap = " << c.note_cap << '\n';
  out << "seed = " << c.seed << '\n';
  out << "bars = " << c.bars << '\n';
  out << "tempo = " << c.tempo_bpm << '\n';
  out << "instrument = " << c.instrument << '\n';
}

double AnalyzeReport::major_fraction() const {
  auto parsed = stats.parsed();
  return parsed == 0 ? 0.0 : double(stats.count(ScaleType::MajorRelMinor)) / double(parsed);
}

AnalyzeReport run_analyze(const PipelineConfig& config) {
  require_file(config.corpus, "corpus directory", "a corpus path argument");

  AnalyzeReport report;
  std::map<Chord, std::uint64_t> chord_counts;
  for (const auto& path : list_midi_files(config.corpus)) {
    Song song;
    try {
      song = read_midi_file(path);
    } catch (const std::exception&) {
      ++report.stats.unreadable;
      continue;
    }
    auto key = detect_key(histogram(song.events));
    if (!key) {
      ++report.stats.undetected;
      continue;
    }
    ++report.stats.by_scale[key->scale_type];
    if (key->scale_type != ScaleType::MajorRelMinor) continue;

    Song shifted = song;
    shifted.events = transpose(song.events, shift_to_c(key->root));
    for (const auto& e : shifted.events) ++report.note_histogram[std::size_t(e.pitch)];
    for (const auto& chord : extract_chords(shifted))
      if (chord) ++chord_counts[*chord];
  }

  report.chord_counts.assign(chord_counts.begin(), chord_counts.end());
  std::sort(report.chord_counts.begin(), report.chord_counts.end(),
            [](const auto& a, const auto& b) {
              return a.second != b.second ? a.second > b.second : a.first < b.first;
            });

  ensure_dir(config.out);
  {
    auto out = open_out(config.out / "report.txt");
    out << "files " << report.stats.parsed() + report.stats.unreadable << '\n';
    out << "unreadable " << report.stats.unreadable << '\n';
    out << "analyzed " << report.stats.parsed() << '\n';
    for (ScaleType type : kScaleTypes)
      out << scale_name(type) << ' ' << report.stats.count(type) << '\n';
    out << "undetected " << report.stats.undetected << '\n';
    out << "major_fraction " << report.major_fraction() << '\n';
    out << "top_chords\n";
    for (std::size_t k = 0; k < std::min<std::size_t>(10, report.chord_counts.size()); ++k)
      out << k + 1 << ' ' << report.chord_counts[k].first.label() << ' '
          << report.chord_counts[k].second << '\n';
  }
  {
    auto out = open_out(config.out / "note_histogram.csv");
    out << "pitch,count\n";
    for (int p = 0; p < 128; ++p) out << p << ',' << report.note_histogram[std::size_t(p)] << '\n';
  }
  {
    auto out = open_out(config.out / "chord_frequencies.csv");
    out << "rank,chord,count\n";
    for (std::size_t k = 0; k < report.chord_counts.size(); ++k)
      out << k + 1 << ',' << report.chord_counts[k].first.label() << ','
          << report.chord_counts[k].second << '\n';
  }
  write_effective_config(config.out / "config_used.txt", config);
  return report;
}

BuildResult run_build_dataset(const PipelineConfig& config) {
  require_file(config.corpus, "corpus directory", "a corpus path argument");
  ensure_dir(config.out / "rolls");

  BuildResult result;
  std::vector<std::vector<std::optional<Chord>>> all_chords;
  std::vector<std::string> roll_names;
  std::vector<std::string> sources;

  for (const auto& path : list_midi_files(config.corpus)) {
    try {
      Song song = read_midi_file(path);
      auto key = detect_key(histogram(song.events));
      if (!key || key->scale_type != ScaleType::MajorRelMinor) {
        ++result.skipped;
        continue;
      }
      Song shifted = song;
      shifted.events = transpose(song.events, shift_to_c(key->root));
      auto chords = extract_chords(shifted);
      PianoRoll roll = to_piano_roll(shifted);
      if (chords.empty() || roll.rows() < 2 || roll.bars() != int(chords.size())) {
        ++result.skipped;
        continue;
      }
      char name[32];
      std::snprintf(name, sizeof name, "%06d.roll", result.songs);
      save_roll_dump(config.out / "rolls" / name, roll);
      roll_names.push_back(std::string("rolls/") + name);
      sources.push_back(path.generic_string());
      all_chords.push_back(std::move(chords));
      ++result.songs;
    } catch (const std::exception& e) {
      std::cerr << "skipping " << path.string() << ": " << e.what() << '\n';
      ++result.skipped;
    }
  }
  if (result.songs == 0) throw std::runtime_error("no usable songs found in " + config.corpus.string());

  ChordVocab vocab = build_vocab(all_chords, config.vocab_size);
  save_dictionary(config.out / "dictionary.txt", vocab);

  std::vector<std::vector<int>> encoded;
  encoded.reserve(all_chords.size());
  for (const auto& chords : all_chords) encoded.push_back(encode_chords(vocab, chords));
  save_chord_corpus(config.out / "chords.txt", encoded);

  auto index = open_out(config.out / "rolls.txt");
  for (std::size_t k = 0; k < roll_names.size(); ++k)
    index << roll_names[k] << '\t' << sources[k] << '\n';

  write_effective_config(config.out / "config_used.txt", config);
  return result;
}

Dataset load_dataset(const std::filesystem::path& dir, bool with_rolls) {
  Dataset ds;
  ds.vocab = load_dictionary(dir / "dictionary.txt");
  ds.chord_seqs = load_chord_corpus(dir / "chords.txt");
  if (ds.chord_seqs.empty()) throw std::runtime_error("empty chord corpus in " + dir.string());
  if (!with_rolls) return ds;

  std::ifstream index(dir / "rolls.txt");
  if (!index) throw std::runtime_error("cannot open roll index in " + dir.string());
  std::string line;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    ds.roll_paths.push_back(dir / line.substr(0, tab));
  }
  if (ds.roll_paths.size() != ds.chord_seqs.size())
    throw std::runtime_error("roll index and chord corpus disagree in " + dir.string());
  return ds;
}

void run_train_chords(const PipelineConfig& config) {
  require_file(config.dataset, "dataset directory", "a dataset path argument");
  Dataset ds = load_dataset(config.dataset, false);

  ChordModel model = make_chord_model(ds.vocab, config.chord_hidden, config.embed_dim,
                                      seed_for(config.seed, "chord-init"));
  ChordTrainConfig train{config.chord_lr, config.epochs, config.chord_bptt};
  ChordTrainer trainer(model, ds.chord_seqs, train);
  for (int e = 0; e < config.epochs; ++e) {
    double loss = trainer.run_epoch();
    std::cout << "chord epoch " << e + 1 << '/' << config.epochs << " loss " << loss << '\n';
  }

  ensure_dir(config.out);
  save_chord_model(config.out / "chord.ckpt", model);
  save_dictionary(config.out / "dictionary.txt", ds.vocab);
  write_effective_config(config.out / "config_used.txt", config);
  std::cout << "saved " << (config.out / "chord.ckpt").string() << '\n';
}

void run_train_poly(const PipelineConfig& config) {
  require_file(config.dataset, "dataset directory", "a dataset path argument");
  require_file(config.chord_model_path, "chord model checkpoint", "--chord-model");

  Dataset ds = load_dataset(config.dataset, true);
  ChordVocab vocab = dictionary_beside(config.chord_model_path);
  if (vocab.id_to_chord != ds.vocab.id_to_chord)
    throw std::runtime_error("chord model dictionary does not match the dataset dictionary");
  ChordModel chord_model = load_chord_model(config.chord_model_path, vocab);

  std::vector<PolySong> songs;
  songs.reserve(ds.chord_seqs.size());
  for (std::size_t k = 0; k < ds.chord_seqs.size(); ++k)
    songs.push_back({load_roll_dump(ds.roll_paths[k]), ds.chord_seqs[k]});

  PolyModel model = make_poly_model(PianoRoll::kPitches, chord_model.embed_dim(),
                                    config.poly_hidden, seed_for(config.seed, "poly-init"));
  PolyTrainConfig train{config.poly_lr, config.epochs, config.poly_bptt};
  PolyTrainer trainer(model, std::move(songs), chord_model.W_embed, train);
  for (int e = 0; e < config.epochs; ++e) {
    double loss = trainer.run_epoch();
    std::cout << "poly epoch " << e + 1 << '/' << config.epochs << " loss " << loss << '\n';
  }

  ensure_dir(config.out);
  save_poly_model(config.out / "poly.ckpt", model);
  write_effective_config(config.out / "config_used.txt", config);
  std::cout << "saved " << (config.out / "poly.ckpt").string() << '\n';
}

GenerateResult run_generate(const PipelineConfig& config) {
  require_file(config.chord_model_path, "chord model checkpoint", "--chord-model");
  require_file(config.poly_model_path, "polyphonic model checkpoint", "--poly-model");
  if (config.bars < 1) throw std::invalid_argument("--bars must be at least 1");
  if (config.tempo_bpm < 1) throw std::invalid_argument("--tempo must be positive");

  ChordVocab vocab = dictionary_beside(config.chord_model_path);
  ChordModel chord_model = load_chord_model(config.chord_model_path, vocab);
  PolyModel poly_model = load_poly_model(config.poly_model_path);
  if (poly_model.embed_dim != chord_model.embed_dim())
    throw std::runtime_error("chord and polyphonic checkpoints use different embedding sizes");

  // Seed: the first bars of --seed-song (shifted to C when its key is
  // detected), or a built-in vamp on the most frequent chord.
  std::vector<int> seed_ids;
  PianoRoll seed_roll(kSeedBars * PianoRoll::kStepsPerBar);
  if (!config.seed_song.empty()) {
    Song song = read_midi_file(config.seed_song);
    auto key = detect_key(histogram(song.events));
    if (key && key->scale_type == ScaleType::MajorRelMinor)
      song.events = transpose(song.events, shift_to_c(key->root));
    seed_ids = encode_chords(vocab, extract_chords(song));
    seed_ids.resize(kSeedBars, vocab.unknown_id);
    PianoRoll roll = to_piano_roll(song);
    for (int r = 0; r < std::min(seed_roll.rows(), roll.rows()); ++r)
      for (int c = 0; c < PianoRoll::kPitches; ++c)
        if (roll.at(r, c)) seed_roll.set(r, c);
  } else {
    int vamp = vocab.size > 0 ? 0 : vocab.unknown_id;
    seed_ids.assign(kSeedBars, vamp);
    if (vocab.size > 0)
      for (int pc : vocab.decode(0).pitch_classes())
        for (int r = 0; r < seed_roll.rows(); ++r)
          seed_roll.set(r, 60 - PianoRoll::kLowestPitch + pc);
  }

  SamplerConfig sampler{config.temperature, seed_for(config.seed, "chord-gen")};
  std::vector<int> progression = generate_chords(chord_model, seed_ids, config.bars, sampler);

  PolyGenerationConfig gen{config.note_cap, seed_for(config.seed, "poly-gen")};
  PianoRoll roll =
      generate_song(poly_model, progression, chord_model.W_embed, seed_roll, seed_ids, gen);

  Song song = roll_to_midi(roll, 60'000'000 / config.tempo_bpm);
  ensure_dir(config.out);
  fs::path midi_path = config.out / "song.mid";
  write_midi_file(midi_path, song, config.instrument);
  save_roll_dump(config.out / "song.roll", roll);
  {
    auto out = open_out(config.out / "progression.txt");
    for (int id : progression)
      out << id << '\t' << (vocab.is_unknown(id) ? std::string("UNK") : vocab.decode(id).label())
          << '\n';
  }
  write_effective_config(config.out / "config_used.txt", config);
  std::cout << "wrote " << midi_path.string() << " (" << config.bars << " bars, "
            << song.events.size() << " notes)\n";
  return {std::move(progression), std::move(roll), std::move(midi_path)};
}

void run_export_embeddings(const PipelineConfig& config) {
  require_file(config.chord_model_path, "chord model checkpoint", "--chord-model");
  ChordVocab vocab = dictionary_beside(config.chord_model_path);
  ChordModel model = load_chord_model(config.chord_model_path, vocab);
  if (model.id_count() < 3)
    throw std::runtime_error("need at least 3 embeddings to project");

  std::vector<neural::Vec> vectors;
  std::vector<std::string> labels;
  for (int id = 0; id < model.id_count(); ++id) {
    vectors.push_back(model.W_embed.col(id));
    labels.push_back(vocab.is_unknown(id) ? std::string("UNK") : vocab.decode(id).label());
  }

  ensure_dir(config.out);
  Projection2D proj = pca_2d(vectors, labels);
  save_projection_csv(config.out / "embeddings.csv", proj);
  {
    auto out = open_out(config.out / "neighbors.txt");
    out.precision(17);
    for (const auto& entry : nearest_neighbor_report(vectors, labels))
      out << entry.label << '\t' << entry.neighbor << '\t' << entry.distance << '\n';
  }
  write_effective_config(config.out / "config_used.txt", config);
  std::cout << "wrote " << (config.out / "embeddings.csv").string() << " (explained "
            << proj.explained1 << " + " << proj.explained2 << ")\n";
}

}  // namespace chordroll
