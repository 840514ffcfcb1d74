#include "cmt/corpus.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cmt/error.hpp"
#include "cmt/metrics.hpp"
#include "cmt/midi_io.hpp"
#include "cmt/parallel.hpp"

namespace cmt::corpus {

namespace fs = std::filesystem;

CorpusEntry CorpusEntry::make(std::string id, QuantizedScore score, Genre genre) {
  CorpusEntry e;
  e.id = std::move(id);
  e.genre = genre;
  e.tokens = encode(score, genre);
  for (int d : density_profile(score)) e.d_m.push_back(d);
  for (int s : strength_profile(score)) e.s_m.push_back(s);
  e.score = std::move(score);
  return e;
}

std::map<std::string, std::string> read_genre_tsv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read genre table " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("genre table is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id\tgenre") throw SchemaError("genre table header must be 'id<TAB>genre'");
  std::map<std::string, std::string> out;
  for (std::size_t no = 2; std::getline(in, line); ++no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("genre table line without a tab", no);
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

namespace {

std::vector<fs::path> midi_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".mid" || ext == ".midi") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return std::pair(a.stem().string(), a.filename().string()) < std::pair(b.stem().string(), b.filename().string());
  });
  return files;
}

std::vector<std::uint8_t> read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// FNV-1a, 64 bit.
struct Hasher {
  std::uint64_t h = 1469598103934665603ULL;
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 1099511628211ULL;
  }
  void str(const std::string& s) {
    const std::uint64_t n = s.size();
    bytes(&n, sizeof n);
    bytes(s.data(), s.size());
  }
};

}  // namespace

std::uint64_t content_hash(const fs::path& midi_dir, const fs::path& genres_tsv) {
  Hasher h;
  const auto tsv = read_all(genres_tsv);
  h.str(std::string(tsv.begin(), tsv.end()));
  for (const auto& f : midi_files(midi_dir)) {
    h.str(f.filename().string());
    const auto b = read_all(f);
    h.str(std::string(b.begin(), b.end()));
  }
  return h.h;
}

Corpus ingest(const fs::path& midi_dir, const fs::path& genres_tsv, unsigned threads) {
  const auto genres = read_genre_tsv(genres_tsv);
  const auto files = midi_files(midi_dir);
  std::vector<std::optional<CorpusEntry>> slots(files.size());
  std::vector<std::string> problems(files.size());
  parallel_for(files.size(), threads, [&](std::size_t i) {
    const std::string id = files[i].stem().string();
    const auto g = genres.find(id);
    if (g == genres.end()) {
      problems[i] = id + ": no genre listed";
      return;
    }
    const auto genre = parse_genre(g->second);
    if (!genre) {
      problems[i] = id + ": unknown genre '" + g->second + "'";
      return;
    }
    try {
      slots[i] = CorpusEntry::make(id, midi::read_file(files[i]), *genre);
    } catch (const Error& e) {
      problems[i] = id + ": " + e.what();
    }
  });
  Corpus c;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (slots[i]) c.entries.push_back(std::move(*slots[i]));
    if (!problems[i].empty()) c.warnings.push_back(problems[i]);
  }
  if (c.entries.empty()) throw InvalidArgument("no usable MIDI files in " + midi_dir.string());
  c.distribution = density_distribution(c.entries);
  c.content_hash = content_hash(midi_dir, genres_tsv);
  return c;
}

video::DensityDistribution density_distribution(const std::vector<CorpusEntry>& entries) {
  if (entries.empty()) throw InvalidArgument("density distribution of an empty corpus");
  std::vector<double> dh(video::kDensityClasses, 0.0), sh(video::kStrengthClasses, 0.0);
  for (const auto& e : entries) {
    for (double d : e.d_m)
      if (d >= 1) dh[static_cast<std::size_t>(d) - 1] += 1;
    for (double s : e.s_m)
      if (s >= 1) sh[static_cast<std::size_t>(std::min<double>(s, video::kStrengthClasses)) - 1] += 1;
  }
  auto cdf = [](std::vector<double> h) {
    double total = 0;
    for (double v : h) total += v;
    if (total == 0) throw InvalidArgument("corpus has no occupied bars");
    double acc = 0;
    for (double& v : h) v = (acc += v) / total;
    h.back() = 1.0;
    return h;
  };
  video::DensityDistribution d;
  d.density_cdf = cdf(dh);
  d.strength_cdf = cdf(sh);
  return d;
}

namespace {

constexpr char kCacheMagic[8] = {'C', 'M', 'T', 'C', 'O', 'R', 'P', '1'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

void put_str(std::vector<std::uint8_t>& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (n > b_.size() - pos_) throw ParseError("truncated corpus cache", pos_);
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_cache(const Corpus& c) {
  std::vector<std::uint8_t> out(std::begin(kCacheMagic), std::end(kCacheMagic));
  put<std::uint64_t>(out, c.content_hash);
  const auto dist = video::serialize_distribution(c.distribution);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dist.size()));
  out.insert(out.end(), dist.begin(), dist.end());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.entries.size()));
  for (const auto& e : c.entries) {
    put_str(out, e.id);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.genre));
    put<double>(out, e.score.tempo_bpm);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.score.n_bars));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.score.notes.size()));
    for (const auto& n : e.score.notes) {
      put<std::uint8_t>(out, static_cast<std::uint8_t>(n.pitch));
      put<std::uint8_t>(out, static_cast<std::uint8_t>(n.instrument));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(n.onset_tick));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(n.duration_ticks));
    }
  }
  return out;
}

Corpus deserialize_cache(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kCacheMagic) || !std::equal(std::begin(kCacheMagic), std::end(kCacheMagic), bytes.begin()))
    throw SchemaError("not a corpus cache (or unsupported cache version)");
  Reader r(bytes.subspan(sizeof(kCacheMagic)));
  Corpus c;
  c.content_hash = r.get<std::uint64_t>();
  c.distribution = video::deserialize_distribution(r.bytes(r.get<std::uint32_t>()));
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string id = r.str();
    const auto genre = r.get<std::uint8_t>();
    if (genre >= kNumGenres) throw SchemaError("bad genre in corpus cache");
    QuantizedScore s;
    s.tempo_bpm = r.get<double>();
    s.n_bars = static_cast<int>(r.get<std::uint32_t>());
    const auto notes = r.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < notes; ++k) {
      NoteEvent n;
      n.pitch = r.get<std::uint8_t>();
      const auto inst = r.get<std::uint8_t>();
      if (inst >= kNumInstruments) throw SchemaError("bad instrument in corpus cache");
      n.instrument = static_cast<Instrument>(inst);
      n.onset_tick = static_cast<int>(r.get<std::uint32_t>());
      n.duration_ticks = static_cast<int>(r.get<std::uint32_t>());
      s.notes.push_back(n);
    }
    try {
      c.entries.push_back(CorpusEntry::make(std::move(id), std::move(s), static_cast<Genre>(genre)));
    } catch (const InvalidArgument& e) {
      throw SchemaError(std::string("invalid score in corpus cache: ") + e.what());
    }
  }
  return c;
}

void save_cache(const fs::path& path, const Corpus& corpus) {
  const auto bytes = serialize_cache(corpus);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write corpus cache " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing corpus cache " + path.string());
}

Corpus load_cache(const fs::path& path) { return deserialize_cache(read_all(path)); }

Corpus ingest_cached(const fs::path& midi_dir, const fs::path& genres_tsv, const fs::path& cache, unsigned threads) {
  if (fs::exists(cache)) {
    try {
      Corpus c = load_cache(cache);
      if (c.content_hash == content_hash(midi_dir, genres_tsv)) return c;
    } catch (const Error&) {
      // Stale or damaged caches are rebuilt.
    }
  }
  Corpus c = ingest(midi_dir, genres_tsv, threads);
  save_cache(cache, c);
  return c;
}

std::vector<Match> match_top_k(const video::VideoRhythm& rhythm, const std::vector<CorpusEntry>& entries,
                               std::size_t k) {
  if (k < 1) throw InvalidArgument("k must be at least 1");
  if (entries.empty()) throw InvalidArgument("cannot match against an empty corpus");
  const auto d_v = video::density_vector(rhythm);
  const auto s_v = video::strength_vector(rhythm);
  std::vector<Match> all;
  for (const auto& e : entries) all.push_back({e.id, metrics::matching_score(e.d_m, d_v, e.s_m, s_v)});
  std::sort(all.begin(), all.end(), [](const Match& a, const Match& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

}  // namespace cmt::corpus
