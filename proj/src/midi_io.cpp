#include "cmt/midi_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <tuple>

#include "cmt/error.hpp"

namespace cmt::midi {

namespace {

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ >= bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint8_t peek() {
    need(1);
    return bytes_[pos_];
  }
  std::uint32_t be(int n) {
    need(n);
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 8) | bytes_[pos_++];
    return v;
  }
  std::uint32_t varlen() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      std::uint8_t b = u8();
      v = (v << 7) | (b & 0x7F);
      if (!(b & 0x80)) return v;
    }
    throw ParseError("variable-length quantity longer than 4 bytes", pos_);
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void skip(std::size_t n) { take(n); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ParseError("unexpected end of data", pos_);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

enum class EvKind { NoteOn, NoteOff, Program, Tempo, EndOfTrack };

struct RawEvent {
  std::uint64_t time = 0;
  int track = 0;
  int seq = 0;
  EvKind kind = EvKind::NoteOn;
  int channel = 0;
  int a = 0;  // pitch / program / microseconds per quarter
};

void read_track(Reader& r, std::size_t end, int track, std::vector<RawEvent>& out) {
  std::uint64_t time = 0;
  int running = 0;
  int seq = 0;
  bool ended = false;
  while (r.offset() < end && !ended) {
    time += r.varlen();
    const std::size_t at = r.offset();
    int status = r.peek();
    if (status & 0x80) {
      r.u8();
    } else {
      if (running == 0) throw ParseError("data byte without running status", at);
      status = running;
    }
    if (status == 0xFF) {
      const int type = r.u8();
      const std::uint32_t len = r.varlen();
      auto data = r.take(len);
      if (type == 0x51) {
        if (len != 3) throw ParseError("tempo meta event must have length 3", at);
        int us = (data[0] << 16) | (data[1] << 8) | data[2];
        if (us == 0) throw ParseError("zero tempo", at);
        out.push_back({time, track, seq++, EvKind::Tempo, 0, us});
      } else if (type == 0x2F) {
        out.push_back({time, track, seq++, EvKind::EndOfTrack, 0, 0});
        ended = true;
      }
      continue;
    }
    if (status == 0xF0 || status == 0xF7) {
      r.skip(r.varlen());
      running = 0;
      continue;
    }
    if (status >= 0xF0) throw ParseError("unsupported system message", at);
    running = status;
    const int kind = status & 0xF0;
    const int channel = status & 0x0F;
    auto data_byte = [&] {
      const std::size_t p = r.offset();
      int b = r.u8();
      if (b & 0x80) throw ParseError("status byte where data byte expected", p);
      return b;
    };
    switch (kind) {
      case 0x80: {
        int pitch = data_byte();
        data_byte();
        out.push_back({time, track, seq++, EvKind::NoteOff, channel, pitch});
        break;
      }
      case 0x90: {
        int pitch = data_byte();
        int velocity = data_byte();
        out.push_back({time, track, seq++, velocity == 0 ? EvKind::NoteOff : EvKind::NoteOn, channel, pitch});
        break;
      }
      case 0xC0:
        out.push_back({time, track, seq++, EvKind::Program, channel, data_byte()});
        break;
      case 0xD0:
        data_byte();
        break;
      default:  // A0, B0, E0
        data_byte();
        data_byte();
        break;
    }
  }
  if (!ended) out.push_back({time, track, seq++, EvKind::EndOfTrack, 0, 0});
}

int to_grid(std::uint64_t pulses, int ppqn) {
  return static_cast<int>(std::llround(static_cast<double>(pulses) * kTicksPerBeat / ppqn));
}

void put_be(std::vector<std::uint8_t>& out, std::uint32_t v, int n) {
  for (int i = n - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_varlen(std::vector<std::uint8_t>& out, std::uint32_t v) {
  std::uint8_t buf[5];
  int n = 0;
  buf[n++] = v & 0x7F;
  while (v >>= 7) buf[n++] = static_cast<std::uint8_t>((v & 0x7F) | 0x80);
  while (n--) out.push_back(buf[n]);
}

void put_chunk(std::vector<std::uint8_t>& out, const char* tag, const std::vector<std::uint8_t>& body) {
  out.insert(out.end(), tag, tag + 4);
  put_be(out, static_cast<std::uint32_t>(body.size()), 4);
  out.insert(out.end(), body.begin(), body.end());
}

struct ChannelSetup {
  int channel;
  int program;  // -1: none
};

ChannelSetup channel_for(Instrument instrument) {
  switch (instrument) {
    case Instrument::Drums:
      return {kDrumChannel, -1};
    case Instrument::Piano:
      return {0, 0};
    case Instrument::Guitar:
      return {1, 24};
    case Instrument::Bass:
      return {2, 32};
    case Instrument::Strings:
      return {3, 48};
  }
  return {0, 0};
}

}  // namespace

Instrument instrument_for_program(int program) {
  if (program >= 0 && program <= 7) return Instrument::Piano;
  if (program >= 24 && program <= 31) return Instrument::Guitar;
  if (program >= 32 && program <= 39) return Instrument::Bass;
  if (program >= 40 && program <= 51) return Instrument::Strings;
  return Instrument::Piano;
}

QuantizedScore parse(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  {
    auto tag = r.take(4);
    if (!std::equal(tag.begin(), tag.end(), "MThd")) throw ParseError("missing MThd header", 0);
  }
  const std::uint32_t header_len = r.be(4);
  if (header_len < 6) throw ParseError("MThd chunk too short", 4);
  const std::size_t header_end = r.offset() + header_len;
  const int format = static_cast<int>(r.be(2));
  const int n_tracks = static_cast<int>(r.be(2));
  const std::size_t division_at = r.offset();
  const int division = static_cast<int>(r.be(2));
  if (format > 1) throw ParseError("only SMF formats 0 and 1 are supported", 8);
  if (division & 0x8000) throw ParseError("SMPTE time division is not supported", division_at);
  if (division == 0) throw ParseError("zero ticks per quarter note", division_at);
  r.skip(header_end - r.offset());

  std::vector<RawEvent> events;
  int track = 0;
  while (track < n_tracks) {
    if (r.remaining() < 8) throw ParseError("missing track chunk", r.offset());
    const std::size_t chunk_at = r.offset();
    auto tag = r.take(4);
    const std::uint32_t len = r.be(4);
    if (r.remaining() < len) throw ParseError("chunk length exceeds file size", chunk_at);
    const std::size_t end = r.offset() + len;
    if (!std::equal(tag.begin(), tag.end(), "MTrk")) {
      r.skip(len);  // alien chunk
      continue;
    }
    read_track(r, end, track, events);
    if (r.offset() > end) throw ParseError("track events overrun chunk", end);
    r.skip(end - r.offset());
    ++track;
  }

  std::stable_sort(events.begin(), events.end(), [](const RawEvent& a, const RawEvent& b) {
    return std::tie(a.time, a.track, a.seq) < std::tie(b.time, b.track, b.seq);
  });

  QuantizedScore score;
  bool tempo_seen = false;
  std::uint64_t first_track_end = 0;
  std::array<int, 16> program{};
  struct Open {
    std::uint64_t start;
    Instrument instrument;
  };
  std::map<std::pair<int, int>, Open> open;  // (channel, pitch)
  std::vector<NoteEvent> notes;
  auto close = [&](std::map<std::pair<int, int>, Open>::iterator it, std::uint64_t end) {
    const int onset = to_grid(it->second.start, division);
    const int dur = std::max(1, to_grid(end - it->second.start, division));
    notes.push_back({it->first.second, onset, dur, it->second.instrument});
    open.erase(it);
  };
  for (const RawEvent& e : events) {
    switch (e.kind) {
      case EvKind::Tempo:
        if (!tempo_seen) score.tempo_bpm = round_tempo(60e6 / e.a);
        tempo_seen = true;
        break;
      case EvKind::Program:
        program[e.channel] = e.a;
        break;
      case EvKind::NoteOn: {
        auto key = std::pair(e.channel, e.a);
        if (auto it = open.find(key); it != open.end()) close(it, e.time);
        Instrument inst = e.channel == kDrumChannel ? Instrument::Drums : instrument_for_program(program[e.channel]);
        open.emplace(key, Open{e.time, inst});
        break;
      }
      case EvKind::NoteOff:
        if (auto it = open.find({e.channel, e.a}); it != open.end()) close(it, e.time);
        break;
      case EvKind::EndOfTrack:
        if (e.track == 0) first_track_end = e.time;
        break;
    }
  }
  const std::uint64_t last_time = events.empty() ? 0 : events.back().time;
  while (!open.empty()) close(open.begin(), last_time);

  if (notes.empty()) throw EmptyScoreError();
  score.notes = std::move(notes);
  const int eot_grid = to_grid(first_track_end, division);
  score.n_bars = std::max(1, (eot_grid + kTicksPerBar - 1) / kTicksPerBar);
  return normalize(std::move(score));
}

std::vector<std::uint8_t> write(const QuantizedScore& score) {
  check_score(score);
  constexpr int kPulsesPerTick = kWritePpqn / kTicksPerBeat;
  std::vector<std::uint8_t> out;
  const auto present = instruments_present(score);

  std::vector<std::uint8_t> header;
  put_be(header, 1, 2);
  put_be(header, static_cast<std::uint32_t>(present.size() + 1), 2);
  put_be(header, kWritePpqn, 2);
  put_chunk(out, "MThd", header);

  {
    std::vector<std::uint8_t> conductor;
    const auto us = static_cast<std::uint32_t>(std::llround(60e6 / score.tempo_bpm));
    put_varlen(conductor, 0);
    conductor.insert(conductor.end(), {0xFF, 0x51, 0x03});
    put_be(conductor, us, 3);
    put_varlen(conductor, 0);
    conductor.insert(conductor.end(), {0xFF, 0x58, 0x04, 0x04, 0x02, 0x18, 0x08});
    put_varlen(conductor, static_cast<std::uint32_t>(score.n_bars * kTicksPerBar * kPulsesPerTick));
    conductor.insert(conductor.end(), {0xFF, 0x2F, 0x00});
    put_chunk(out, "MTrk", conductor);
  }

  for (Instrument inst : present) {
    const ChannelSetup setup = channel_for(inst);
    struct Ev {
      std::uint32_t time;
      int on;
      int pitch;
    };
    std::vector<Ev> evs;
    for (const auto& n : score.notes) {
      if (n.instrument != inst) continue;
      evs.push_back({static_cast<std::uint32_t>(n.onset_tick * kPulsesPerTick), 1, n.pitch});
      evs.push_back({static_cast<std::uint32_t>(n.end_tick() * kPulsesPerTick), 0, n.pitch});
    }
    std::sort(evs.begin(), evs.end(),
              [](const Ev& a, const Ev& b) { return std::tie(a.time, a.on, a.pitch) < std::tie(b.time, b.on, b.pitch); });

    std::vector<std::uint8_t> body;
    const auto name = to_string(inst);
    put_varlen(body, 0);
    body.insert(body.end(), {0xFF, 0x03});
    put_varlen(body, static_cast<std::uint32_t>(name.size()));
    body.insert(body.end(), name.begin(), name.end());
    if (setup.program >= 0) {
      put_varlen(body, 0);
      body.push_back(static_cast<std::uint8_t>(0xC0 | setup.channel));
      body.push_back(static_cast<std::uint8_t>(setup.program));
    }
    std::uint32_t now = 0;
    for (const Ev& e : evs) {
      put_varlen(body, e.time - now);
      now = e.time;
      body.push_back(static_cast<std::uint8_t>((e.on ? 0x90 : 0x80) | setup.channel));
      body.push_back(static_cast<std::uint8_t>(e.pitch));
      body.push_back(e.on ? kWriteVelocity : 0);
    }
    put_varlen(body, 0);
    body.insert(body.end(), {0xFF, 0x2F, 0x00});
    put_chunk(out, "MTrk", body);
  }
  return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

QuantizedScore read_file(const std::filesystem::path& path) {
  auto bytes = read_bytes(path);
  return parse(bytes);
}

void write_file(const std::filesystem::path& path, const QuantizedScore& score) { write_bytes(path, write(score)); }

}  // namespace cmt::midi
