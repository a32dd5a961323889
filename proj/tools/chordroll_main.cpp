// Command-line front end for the corpus analysis / dataset / training /
// generation pipeline.

#include <CLI11.hpp>
#include <iostream>

#include "chordroll/pipeline.hpp"

int main(int argc, char** argv) {
  chordroll::PipelineConfig cfg;

  CLI::App app{"two-stage LSTM music generation: chord progressions first, polyphonic notes second"};
  app.set_config("--config", "", "flat key = value configuration file (flags take precedence)");
  app.require_subcommand(1);

  app.add_option("--out", cfg.out, "output directory")->capture_default_str();
  app.add_option("--seed", cfg.seed, "master random seed; all stages derive from it")
      ->capture_default_str();
  app.add_option("--vocab-size", cfg.vocab_size, "chord vocabulary size")->capture_default_str();
  app.add_option("--embed-dim", cfg.embed_dim, "chord embedding dimension")->capture_default_str();
  app.add_option("--chord-hidden", cfg.chord_hidden, "chord LSTM hidden size")->capture_default_str();
  app.add_option("--poly-hidden", cfg.poly_hidden, "polyphonic LSTM hidden size")
      ->capture_default_str();
  app.add_option("--chord-lr", cfg.chord_lr, "chord model learning rate")->capture_default_str();
  app.add_option("--poly-lr", cfg.poly_lr, "polyphonic model learning rate")->capture_default_str();
  app.add_option("--epochs", cfg.epochs, "training epochs")->capture_default_str();
  app.add_option("--chord-bptt", cfg.chord_bptt, "chord truncated-BPTT window (bars)")
      ->capture_default_str();
  app.add_option("--poly-bptt", cfg.poly_bptt, "polyphonic truncated-BPTT window (steps)")
      ->capture_default_str();
  app.add_option("--temperature", cfg.temperature, "chord sampling temperature (0 = argmax)")
      ->capture_default_str();
  app.add_option("--note-cap", cfg.note_cap, "soft limit on expected notes per step")
      ->capture_default_str();
  app.add_option("--bars", cfg.bars, "bars to generate")->capture_default_str();
  app.add_option("--tempo", cfg.tempo_bpm, "playback tempo in BPM")->capture_default_str();
  app.add_option("--instrument", cfg.instrument, "General MIDI program number")
      ->capture_default_str();
  app.add_option("--chord-model", cfg.chord_model_path, "chord model checkpoint");
  app.add_option("--poly-model", cfg.poly_model_path, "polyphonic model checkpoint");
  app.add_option("--seed-song", cfg.seed_song, "MIDI file whose opening bars seed generation");

  auto* analyze = app.add_subcommand("analyze", "key statistics and chord frequencies of a corpus");
  analyze->add_option("corpus", cfg.corpus, "MIDI corpus directory")->required();
  analyze->fallthrough();

  auto* build = app.add_subcommand("build-dataset",
                                   "filter to major/relative-minor, shift to C, extract chords and rolls");
  build->add_option("corpus", cfg.corpus, "MIDI corpus directory")->required();
  build->fallthrough();

  auto* train_chords = app.add_subcommand("train-chords", "train the chord progression model");
  train_chords->add_option("dataset", cfg.dataset, "dataset directory from build-dataset")
      ->required();
  train_chords->fallthrough();

  auto* train_poly = app.add_subcommand("train-poly", "train the polyphonic note model");
  train_poly->add_option("dataset", cfg.dataset, "dataset directory from build-dataset")
      ->required();
  train_poly->fallthrough();

  auto* generate = app.add_subcommand("generate", "generate a chord progression and render a song");
  generate->fallthrough();

  auto* export_embeddings =
      app.add_subcommand("export-embeddings", "PCA projection and neighbor report of chord embeddings");
  export_embeddings->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) {
      auto report = chordroll::run_analyze(cfg);
      std::cout << "analyzed " << report.stats.parsed() << " songs ("
                << report.stats.unreadable << " unreadable), major fraction "
                << report.major_fraction() << '\n';
    } else if (build->parsed()) {
      auto result = chordroll::run_build_dataset(cfg);
      std::cout << "dataset: " << result.songs << " songs, " << result.skipped << " skipped\n";
    } else if (train_chords->parsed()) {
      chordroll::run_train_chords(cfg);
    } else if (train_poly->parsed()) {
      chordroll::run_train_poly(cfg);
    } else if (generate->parsed()) {
      chordroll::run_generate(cfg);
    } else if (export_embeddings->parsed()) {
      chordroll::run_export_embeddings(cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
