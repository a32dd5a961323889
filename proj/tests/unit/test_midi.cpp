#include <doctest.h>

#include <random>

#include "chordroll/midi.hpp"
#include "support/synthetic.hpp"

using namespace chordroll;

namespace {

// Hand-assembled SMF: header plus one track from raw event bytes.
std::vector<std::uint8_t> smf(int format, int ntrks, int division,
                              const std::vector<std::uint8_t>& track) {
  std::vector<std::uint8_t> b = {'M', 'T', 'h', 'd', 0, 0, 0, 6};
  auto u16 = [&](int v) {
    b.push_back(std::uint8_t(v >> 8));
    b.push_back(std::uint8_t(v & 0xff));
  };
  u16(format);
  u16(ntrks);
  u16(division);
  b.insert(b.end(), {'M', 'T', 'r', 'k'});
  std::uint32_t len = std::uint32_t(track.size());
  for (int i = 3; i >= 0; --i) b.push_back(std::uint8_t(len >> (8 * i) & 0xff));
  b.insert(b.end(), track.begin(), track.end());
  return b;
}

const std::vector<std::uint8_t> kEot = {0x00, 0xff, 0x2f, 0x00};

}  // namespace

TEST_SUITE("midi") {

TEST_CASE("single note-on/note-off pair resolves to one event") {
  std::vector<std::uint8_t> track = {
      0x00, 0x90, 60, 80,        // note on, tick 0
      0x83, 0x60, 0x80, 60, 64,  // delta 480 (0x83 0x60), note off
  };
  track.insert(track.end(), kEot.begin(), kEot.end());
  Song song = parse_midi(smf(0, 1, 480, track));
  CHECK(song.ticks_per_beat == 480);
  REQUIRE(song.events.size() == 1);
  CHECK(song.events[0] == NoteEvent{60, 0, 480, 80, 0});
}

TEST_CASE("note-on with velocity zero acts as note-off") {
  std::vector<std::uint8_t> track = {
      0x00, 0x90, 60, 64,       // on
      0x83, 0x60, 0x90, 60, 0,  // vel-0 off at 480
  };
  track.insert(track.end(), kEot.begin(), kEot.end());
  Song song = parse_midi(smf(0, 1, 480, track));
  REQUIRE(song.events.size() == 1);
  CHECK(song.events[0].end_tick == 480);
  CHECK(song.events[0].velocity == 64);
}

TEST_CASE("percussion channel 9 is excluded") {
  std::vector<std::uint8_t> track = {
      0x00, 0x99, 36, 100,  // drum hit
      0x60, 0x89, 36, 64,
  };
  track.insert(track.end(), kEot.begin(), kEot.end());
  Song song = parse_midi(smf(0, 1, 480, track));
  CHECK(song.events.empty());
}

TEST_CASE("running status reuses the previous status byte") {
  std::vector<std::uint8_t> track = {
      0x00, 0x90, 60, 80,  // explicit status
      0x00, 64,   80,      // running status: another note on
      0x60, 60,   0,       // running status: off via vel 0
      0x00, 64,   0,
  };
  track.insert(track.end(), kEot.begin(), kEot.end());
  Song song = parse_midi(smf(0, 1, 96, track));
  REQUIRE(song.events.size() == 2);
  CHECK(song.events[0].pitch == 60);
  CHECK(song.events[1].pitch == 64);
  CHECK(song.events[0].end_tick == 96);
}

TEST_CASE("unmatched note-on closes at track end") {
  std::vector<std::uint8_t> track = {
      0x00, 0x90, 60, 80,  // never released
      0x81, 0x40, 0x90, 62, 70,
      0x40, 0x80, 62, 64,
  };
  track.insert(track.end(), kEot.begin(), kEot.end());
  Song song = parse_midi(smf(0, 1, 480, track));
  REQUIRE(song.events.size() == 2);
  CHECK(song.events[0].pitch == 60);
  CHECK(song.events[0].end_tick == 256);  // track end = last tick seen
}

TEST_CASE("first tempo and time signature win, later ones ignored") {
  std::vector<std::uint8_t> track = {
      0x00, 0xff, 0x58, 0x04, 3,    3,    24, 8,  // 3/8
      0x00, 0xff, 0x51, 0x03, 0x0f, 0x42, 0x40,   // 1,000,000 us
      0x10, 0xff, 0x51, 0x03, 0x07, 0xa1, 0x20,   // later tempo, ignored
      0x00, 0xff, 0x58, 0x04, 4,    2,    24, 8,  // later time sig, ignored
  };
  track.insert(track.end(), kEot.begin(), kEot.end());
  Song song = parse_midi(smf(0, 1, 480, track));
  CHECK(song.tempo_us_per_beat == 1000000);
  CHECK(song.time_signature == TimeSignature{3, 8});
}

TEST_CASE("malformed input yields typed errors") {
  CHECK_THROWS_AS(parse_midi(std::vector<std::uint8_t>{'X', 'T', 'h', 'd', 0, 0, 0, 6}),
                  MidiError);
  CHECK_THROWS_AS(parse_midi(smf(2, 1, 480, kEot)), MidiError);
  try {
    parse_midi(smf(2, 1, 480, kEot));
  } catch (const MidiError& e) {
    CHECK(e.kind() == MidiError::Kind::Unsupported);
  }
  auto truncated = smf(0, 1, 480, kEot);
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(parse_midi(truncated), MidiError);
  // header claims two tracks, file has one
  CHECK_THROWS_AS(parse_midi(smf(0, 2, 480, kEot)), MidiError);
}

TEST_CASE("format 1 tracks merge into one sorted stream") {
  std::vector<std::uint8_t> t1 = {0x40, 0x90, 60, 80, 0x40, 0x80, 60, 64};
  t1.insert(t1.end(), kEot.begin(), kEot.end());
  std::vector<std::uint8_t> t2 = {0x00, 0x91, 72, 90, 0x81, 0x00, 0x81, 72, 64};
  t2.insert(t2.end(), kEot.begin(), kEot.end());

  auto bytes = smf(1, 2, 480, t1);
  bytes.insert(bytes.end(), {'M', 'T', 'r', 'k'});
  std::uint32_t len = std::uint32_t(t2.size());
  for (int i = 3; i >= 0; --i) bytes.push_back(std::uint8_t(len >> (8 * i) & 0xff));
  bytes.insert(bytes.end(), t2.begin(), t2.end());

  Song song = parse_midi(bytes);
  REQUIRE(song.events.size() == 2);
  CHECK(song.events[0].pitch == 72);  // starts at tick 0
  CHECK(song.events[1].pitch == 60);
  CHECK(song.events[0].channel == 1);
}

TEST_CASE("empty song writes header, tempo, program change, end-of-track only") {
  Song empty;
  auto bytes = write_midi(empty, 0);
  const std::vector<std::uint8_t> expected = {
      'M',  'T',  'h',  'd',  0,    0,    0,    6,    0,    0,   0,    1,    0x01, 0xe0,
      'M',  'T',  'r',  'k',  0,    0,    0,    14,
      0x00, 0xff, 0x51, 0x03, 0x07, 0xa1, 0x20,  // 500000 us per beat
      0x00, 0xc0, 0x00,                          // program change
      0x00, 0xff, 0x2f, 0x00,
  };
  CHECK(bytes == expected);
}

TEST_CASE("write then parse reproduces events exactly") {
  Song song;
  song.ticks_per_beat = 480;
  song.events = {{60, 0, 480, 80, 0}};
  Song back = parse_midi(write_midi(song, 0));
  CHECK(back.events == song.events);
  CHECK(back.tempo_us_per_beat == song.tempo_us_per_beat);
}

TEST_CASE("overlapping same-pitch notes survive the round trip (FIFO matching)") {
  Song song;
  song.ticks_per_beat = 480;
  song.events = {{60, 0, 480, 80, 0}, {60, 240, 720, 90, 0}};
  Song back = parse_midi(write_midi(song, 5));
  CHECK(back.events == song.events);
}

TEST_CASE("random songs round-trip byte to events") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 50; ++k) {
    Song song = testsupport::random_song(rng);
    Song back = parse_midi(write_midi(song, int(rng() % 128)));
    CHECK(back.events == song.events);
    CHECK(back.ticks_per_beat == song.ticks_per_beat);
    CHECK(back.tempo_us_per_beat == song.tempo_us_per_beat);
  }
}

TEST_CASE("write_midi validates invariants") {
  Song bad;
  bad.events = {{60, 100, 100, 80, 0}};  // zero length
  CHECK_THROWS_AS(write_midi(bad, 0), std::invalid_argument);
  Song song;
  CHECK_THROWS_AS(write_midi(song, 128), std::invalid_argument);
}

}  // TEST_SUITE
