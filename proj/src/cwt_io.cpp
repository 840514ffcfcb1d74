#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cmt/error.hpp"
#include "cmt/tokens.hpp"

namespace cmt {

namespace {

constexpr std::string_view kMagic = "# cwt v1";

std::string opt_int(const std::optional<int>& v) { return v ? std::to_string(*v) : "_"; }

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::optional<int> parse_opt_int(const std::string& s, std::size_t line) {
  if (s == "_") return std::nullopt;
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError("bad integer '" + s + "'", line);
  return v;
}

}  // namespace

void write_cwt(std::ostream& out, const TokenSequence& tokens) {
  out << kMagic << '\n';
  out << "TEMPO " << format_double(tokens.tempo_bpm) << '\n';
  for (const auto& p : tokens.prefix) {
    if (p.kind == InitialToken::Kind::Genre)
      out << "GENRE " << to_string(static_cast<Genre>(p.value)) << '\n';
    else
      out << "INSTR " << to_string(static_cast<Instrument>(p.value)) << '\n';
  }
  for (const auto& t : tokens.body) {
    switch (t.type) {
      case TokenType::Rhythm:
        out << "RHYTHM";
        break;
      case TokenType::Note:
        out << "NOTE";
        break;
      case TokenType::Eos:
        out << "EOS";
        break;
    }
    out << ' ';
    if (!t.beat)
      out << '_';
    else if (*t.beat == kBarBeat)
      out << "BAR";
    else
      out << 'T' << *t.beat;
    out << ' ' << opt_int(t.density) << ' ' << opt_int(t.strength) << ' '
        << (t.instrument ? std::string(to_string(*t.instrument)) : "_") << ' ' << opt_int(t.pitch) << ' '
        << opt_int(t.duration) << '\n';
  }
}

TokenSequence read_cwt(std::istream& in) {
  TokenSequence seq;
  std::string line;
  std::size_t lineno = 0;
  bool header_checked = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("#", 0) == 0) {
      if (!header_checked && line.rfind("# cwt v", 0) == 0 && line != kMagic)
        throw SchemaError("unsupported cwt version: " + line);
      header_checked = true;
      continue;
    }
    auto w = split(line);
    if (w.empty()) continue;
    if (w[0] == "TEMPO") {
      if (w.size() != 2) throw ParseError("TEMPO takes one value", lineno);
      double v = 0;
      auto res = std::from_chars(w[1].data(), w[1].data() + w[1].size(), v);
      if (res.ec != std::errc() || !(v > 0)) throw ParseError("bad tempo", lineno);
      seq.tempo_bpm = v;
    } else if (w[0] == "GENRE") {
      auto g = w.size() == 2 ? parse_genre(w[1]) : std::nullopt;
      if (!g) throw ParseError("bad GENRE line", lineno);
      seq.prefix.push_back(InitialToken::genre(*g));
    } else if (w[0] == "INSTR") {
      auto i = w.size() == 2 ? parse_instrument(w[1]) : std::nullopt;
      if (!i) throw ParseError("bad INSTR line", lineno);
      seq.prefix.push_back(InitialToken::instrument(*i));
    } else {
      if (w.size() != 7) throw ParseError("token line needs 7 fields", lineno);
      CompoundToken t;
      if (w[0] == "RHYTHM")
        t.type = TokenType::Rhythm;
      else if (w[0] == "NOTE")
        t.type = TokenType::Note;
      else if (w[0] == "EOS")
        t.type = TokenType::Eos;
      else
        throw ParseError("unknown token type '" + w[0] + "'", lineno);
      if (w[1] == "BAR")
        t.beat = kBarBeat;
      else if (w[1] != "_") {
        if (w[1].size() < 2 || w[1][0] != 'T') throw ParseError("bad beat '" + w[1] + "'", lineno);
        t.beat = parse_opt_int(w[1].substr(1), lineno);
        if (*t.beat < 1 || *t.beat > kTicksPerBar) throw ParseError("tick out of range", lineno);
      }
      t.density = parse_opt_int(w[2], lineno);
      t.strength = parse_opt_int(w[3], lineno);
      if (w[4] != "_") {
        t.instrument = parse_instrument(w[4]);
        if (!t.instrument) throw ParseError("unknown instrument '" + w[4] + "'", lineno);
      }
      t.pitch = parse_opt_int(w[5], lineno);
      t.duration = parse_opt_int(w[6], lineno);
      seq.body.push_back(t);
    }
  }
  return seq;
}

std::string to_cwt(const TokenSequence& tokens) {
  std::ostringstream out;
  write_cwt(out, tokens);
  return out.str();
}

TokenSequence from_cwt(const std::string& text) {
  std::istringstream in(text);
  return read_cwt(in);
}

void save_cwt(const std::filesystem::path& path, const TokenSequence& tokens) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_cwt(out, tokens);
}

TokenSequence load_cwt(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_cwt(in);
}

}  // namespace cmt
