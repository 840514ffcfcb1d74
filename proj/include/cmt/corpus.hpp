#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cmt/score.hpp"
#include "cmt/tokens.hpp"
#include "cmt/video_rhythm.hpp"

namespace cmt::corpus {

struct CorpusEntry {
  std::string id;
  QuantizedScore score;
  Genre genre = Genre::Pop;
  TokenSequence tokens;
  std::vector<double> d_m;  // density per bar
  std::vector<double> s_m;  // strength per global tick, 0 where nothing starts

  // Derives the token stream and rhythm vectors from score and genre.
  static CorpusEntry make(std::string id, QuantizedScore score, Genre genre);
};

struct Corpus {
  std::uint64_t content_hash = 0;
  std::vector<CorpusEntry> entries;  // sorted by id
  video::DensityDistribution distribution;
  std::vector<std::string> warnings;  // not cached
};

// Genre table with header "id<TAB>genre". Genre names are kept verbatim.
std::map<std::string, std::string> read_genre_tsv(const std::filesystem::path& path);

// Parses every .mid/.midi file in the directory. Files that fail to parse, lack a genre or
// name an unknown genre are skipped with a warning. Throws when nothing is left.
Corpus ingest(const std::filesystem::path& midi_dir, const std::filesystem::path& genres_tsv, unsigned threads = 1);

// Density classes 1..16 (empty bars excluded) and strengths 1..20 as cumulative proportions.
video::DensityDistribution density_distribution(const std::vector<CorpusEntry>& entries);

std::vector<std::uint8_t> serialize_cache(const Corpus& corpus);
Corpus deserialize_cache(std::span<const std::uint8_t> bytes);
void save_cache(const std::filesystem::path& path, const Corpus& corpus);
Corpus load_cache(const std::filesystem::path& path);

// Hash over file names, file bytes and genre table that keys the cache.
std::uint64_t content_hash(const std::filesystem::path& midi_dir, const std::filesystem::path& genres_tsv);

// Reuses `cache` when its hash matches the inputs, otherwise ingests and rewrites it.
Corpus ingest_cached(const std::filesystem::path& midi_dir, const std::filesystem::path& genres_tsv,
                     const std::filesystem::path& cache, unsigned threads = 1);

struct Match {
  std::string id;
  double score = 0;
  friend bool operator==(const Match&, const Match&) = default;
};

// Highest matching score first; equal scores ordered by id.
std::vector<Match> match_top_k(const video::VideoRhythm& rhythm, const std::vector<CorpusEntry>& entries, std::size_t k);

}  // namespace cmt::corpus
