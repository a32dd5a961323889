#include "chordroll/midi.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace chordroll {

namespace {

constexpr int kPercussionChannel = 9;

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void require(std::size_t n) const {
    if (remaining() < n)
      throw MidiError(MidiError::Kind::Format, "truncated MIDI data");
  }

  std::uint8_t peek() const {
    require(1);
    return data_[pos_];
  }

  std::uint8_t u8() {
    require(1);
    return data_[pos_++];
  }

  std::uint16_t u16be() {
    require(2);
    std::uint16_t v = std::uint16_t(data_[pos_] << 8 | data_[pos_ + 1]);
    pos_ += 2;
    return v;
  }

  std::uint32_t u32be() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | data_[pos_ + i];
    pos_ += 4;
    return v;
  }

  std::span<const std::uint8_t> bytes(std::size_t n) {
    require(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  void skip(std::size_t n) {
    require(n);
    pos_ += n;
  }

  // Variable-length quantity, at most 4 bytes.
  std::uint32_t vlq() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      std::uint8_t b = u8();
      v = v << 7 | (b & 0x7f);
      if (!(b & 0x80)) return v;
    }
    throw MidiError(MidiError::Kind::Format, "variable-length quantity longer than 4 bytes");
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

struct MetaCandidate {
  std::int64_t tick = 0;
  int track = 0;
  int order = 0;

  bool operator<(const MetaCandidate& o) const {
    return std::tie(tick, track, order) < std::tie(o.tick, o.track, o.order);
  }
};

struct TrackParseState {
  std::vector<NoteEvent> events;
  bool have_tempo = false;
  MetaCandidate tempo_at;
  int tempo_us = 0;
  bool have_timesig = false;
  MetaCandidate timesig_at;
  TimeSignature timesig;
};

struct OpenNote {
  std::int64_t start = 0;
  int velocity = 0;
};

void close_note(std::vector<NoteEvent>& out, int channel, int pitch, const OpenNote& open,
                std::int64_t end) {
  NoteEvent ev;
  ev.pitch = pitch;
  ev.start_tick = open.start;
  ev.end_tick = std::max(end, open.start + 1);  // keep end > start for degenerate pairs
  ev.velocity = open.velocity;
  ev.channel = channel;
  out.push_back(ev);
}

TrackParseState parse_track(std::span<const std::uint8_t> chunk, int track_index) {
  ByteReader r(chunk);
  TrackParseState st;
  // open note-ons per (channel, pitch); note-off closes the oldest one (FIFO)
  std::map<int, std::vector<OpenNote>> open;

  std::int64_t tick = 0;
  std::int64_t last_tick = 0;
  int running_status = 0;
  int order = 0;

  while (r.remaining() > 0) {
    tick += r.vlq();
    last_tick = std::max(last_tick, tick);

    int status;
    if (r.peek() & 0x80) {
      status = r.u8();
    } else {
      if (running_status == 0)
        throw MidiError(MidiError::Kind::Format, "data byte without running status");
      status = running_status;
    }

    if (status == 0xff) {  // meta event
      running_status = 0;
      int type = r.u8();
      std::uint32_t len = r.vlq();
      auto data = r.bytes(len);
      if (type == 0x51 && len == 3) {
        if (!st.have_tempo) {
          st.have_tempo = true;
          st.tempo_at = {tick, track_index, order};
          st.tempo_us = data[0] << 16 | data[1] << 8 | data[2];
        }
      } else if (type == 0x58 && len >= 2) {
        if (!st.have_timesig) {
          st.have_timesig = true;
          st.timesig_at = {tick, track_index, order};
          st.timesig = {data[0], 1 << data[1]};
        }
      } else if (type == 0x2f) {
        break;  // end of track
      }
    } else if (status == 0xf0 || status == 0xf7) {  // sysex, skipped
      running_status = 0;
      r.skip(r.vlq());
    } else if (status >= 0x80) {
      running_status = status;
      int kind = status & 0xf0;
      int channel = status & 0x0f;
      int d0 = r.u8() & 0x7f;
      int d1 = 0;
      if (kind != 0xc0 && kind != 0xd0) d1 = r.u8() & 0x7f;

      if (channel == kPercussionChannel) {
        ++order;
        continue;
      }
      int key = channel << 7 | d0;
      if (kind == 0x90 && d1 > 0) {
        open[key].push_back({tick, d1});
      } else if (kind == 0x80 || (kind == 0x90 && d1 == 0)) {
        auto it = open.find(key);
        if (it != open.end() && !it->second.empty()) {
          close_note(st.events, channel, d0, it->second.front(), tick);
          it->second.erase(it->second.begin());
        }
      }
    } else {
      throw MidiError(MidiError::Kind::Format, "unexpected status byte");
    }
    ++order;
  }

  // notes still open are closed at the end of the track
  for (auto& [key, notes] : open)
    for (const auto& n : notes) close_note(st.events, key >> 7, key & 0x7f, n, last_tick);

  return st;
}

std::uint64_t checked_u64(std::int64_t v, const char* what) {
  if (v < 0) throw std::invalid_argument(std::string("negative tick in ") + what);
  return std::uint64_t(v);
}

void append_vlq(std::vector<std::uint8_t>& out, std::uint64_t v) {
  std::uint8_t buf[10];
  int n = 0;
  buf[n++] = v & 0x7f;
  while (v >>= 7) buf[n++] = (v & 0x7f) | 0x80;
  while (n--) out.push_back(buf[n]);
}

void append_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(v >> 24 & 0xff);
  out.push_back(v >> 16 & 0xff);
  out.push_back(v >> 8 & 0xff);
  out.push_back(v & 0xff);
}

void append_u16be(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(v >> 8 & 0xff);
  out.push_back(v & 0xff);
}

}  // namespace

std::int64_t Song::end_tick() const {
  std::int64_t end = 0;
  for (const auto& e : events) end = std::max(end, e.end_tick);
  return end;
}

Song parse_midi(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);

  if (r.remaining() < 8 || !std::equal(bytes.begin(), bytes.begin() + 4,
                                       reinterpret_cast<const std::uint8_t*>("MThd")))
    throw MidiError(MidiError::Kind::Format, "missing MThd header");
  r.skip(4);
  std::uint32_t header_len = r.u32be();
  if (header_len < 6) throw MidiError(MidiError::Kind::Format, "MThd chunk too short");
  int format = r.u16be();
  int ntrks = r.u16be();
  int division = r.u16be();
  r.skip(header_len - 6);

  if (format == 2) throw MidiError(MidiError::Kind::Unsupported, "format 2 files are not supported");
  if (format != 0 && format != 1)
    throw MidiError(MidiError::Kind::Format, "unknown SMF format " + std::to_string(format));
  if (division & 0x8000)
    throw MidiError(MidiError::Kind::Unsupported, "SMPTE time division is not supported");
  if (division == 0) throw MidiError(MidiError::Kind::Format, "zero ticks per beat");

  Song song;
  song.ticks_per_beat = division;

  std::vector<TrackParseState> tracks;
  int found = 0;
  while (found < ntrks) {
    if (r.remaining() == 0)
      throw MidiError(MidiError::Kind::Format, "fewer track chunks than header declares");
    auto type = r.bytes(4);
    std::uint32_t len = r.u32be();
    auto chunk = r.bytes(len);
    if (!std::equal(type.begin(), type.end(), reinterpret_cast<const std::uint8_t*>("MTrk")))
      continue;  // skip alien chunks
    tracks.push_back(parse_track(chunk, found));
    ++found;
  }

  bool have_tempo = false, have_timesig = false;
  MetaCandidate tempo_at, timesig_at;
  for (const auto& t : tracks) {
    if (t.have_tempo && (!have_tempo || t.tempo_at < tempo_at)) {
      have_tempo = true;
      tempo_at = t.tempo_at;
      song.tempo_us_per_beat = t.tempo_us;
    }
    if (t.have_timesig && (!have_timesig || t.timesig_at < timesig_at)) {
      have_timesig = true;
      timesig_at = t.timesig_at;
      song.time_signature = t.timesig;
    }
    song.events.insert(song.events.end(), t.events.begin(), t.events.end());
  }

  std::stable_sort(song.events.begin(), song.events.end(),
                   [](const NoteEvent& a, const NoteEvent& b) { return a.start_tick < b.start_tick; });
  return song;
}

std::vector<std::uint8_t> write_midi(const Song& song, int instrument) {
  if (song.ticks_per_beat <= 0 || song.ticks_per_beat > 0x7fff)
    throw std::invalid_argument("ticks_per_beat out of range for SMF");
  if (instrument < 0 || instrument > 127) throw std::invalid_argument("instrument out of range");

  // messages ordered by (tick, class): note-offs precede note-ons at equal ticks
  struct Msg {
    std::uint64_t tick;
    int cls;
    std::size_t seq;
    std::uint8_t bytes[3];
    int len;
  };
  std::vector<Msg> msgs;
  msgs.reserve(song.events.size() * 2);
  for (std::size_t i = 0; i < song.events.size(); ++i) {
    const NoteEvent& e = song.events[i];
    if (e.pitch < 0 || e.pitch > 127 || e.velocity < 1 || e.velocity > 127 || e.channel < 0 ||
        e.channel > 15 || e.end_tick <= e.start_tick)
      throw std::invalid_argument("note event violates Song invariants");
    Msg on{checked_u64(e.start_tick, "note-on"), 1, i,
           {std::uint8_t(0x90 | e.channel), std::uint8_t(e.pitch), std::uint8_t(e.velocity)}, 3};
    Msg off{checked_u64(e.end_tick, "note-off"), 0, i,
            {std::uint8_t(0x80 | e.channel), std::uint8_t(e.pitch), 64}, 3};
    msgs.push_back(on);
    msgs.push_back(off);
  }
  std::sort(msgs.begin(), msgs.end(), [](const Msg& a, const Msg& b) {
    return std::tie(a.tick, a.cls, a.seq) < std::tie(b.tick, b.cls, b.seq);
  });

  std::vector<std::uint8_t> track;
  // tempo meta
  append_vlq(track, 0);
  track.insert(track.end(), {0xff, 0x51, 0x03});
  track.push_back(song.tempo_us_per_beat >> 16 & 0xff);
  track.push_back(song.tempo_us_per_beat >> 8 & 0xff);
  track.push_back(song.tempo_us_per_beat & 0xff);
  // program change
  append_vlq(track, 0);
  track.insert(track.end(), {std::uint8_t(0xc0), std::uint8_t(instrument)});

  std::uint64_t cursor = 0;
  for (const Msg& m : msgs) {
    append_vlq(track, m.tick - cursor);
    cursor = m.tick;
    track.insert(track.end(), m.bytes, m.bytes + m.len);
  }
  // end of track
  append_vlq(track, 0);
  track.insert(track.end(), {0xff, 0x2f, 0x00});

  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'M', 'T', 'h', 'd'});
  append_u32be(out, 6);
  append_u16be(out, 0);  // format 0
  append_u16be(out, 1);
  append_u16be(out, std::uint16_t(song.ticks_per_beat));
  out.insert(out.end(), {'M', 'T', 'r', 'k'});
  append_u32be(out, std::uint32_t(track.size()));
  out.insert(out.end(), track.begin(), track.end());
  return out;
}

Song read_midi_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MidiError(MidiError::Kind::Format, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_midi(bytes);
}

void write_midi_file(const std::filesystem::path& path, const Song& song, int instrument) {
  auto bytes = write_midi(song, instrument);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

}  // namespace chordroll
