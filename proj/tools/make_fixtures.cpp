// Writes the synthetic fixtures used by the CLI tests and the README walkthrough:
//   <out>/corpus/*.mid + <out>/genres.tsv   toy corpus (20 pieces)
//   <out>/frames/                            textured frames with periodic motion bursts
//   <out>/rhythm_60s.json                    60 s, 30 fps, 120 BPM rhythm
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "cmt/midi_io.hpp"
#include "cmt/toy_data.hpp"
#include "cmt/video_rhythm.hpp"

namespace fs = std::filesystem;
using namespace cmt;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <output_dir>\n";
    return 2;
  }
  try {
    const fs::path root = argv[1];
    fs::create_directories(root / "corpus");
    fs::create_directories(root / "frames");

    std::ofstream tsv(root / "genres.tsv", std::ios::binary);
    tsv << "id\tgenre\n";
    const auto pieces = toy::toy_corpus(7, 20);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      const std::string id = "piece_" + std::string(i < 10 ? "0" : "") + std::to_string(i);
      midi::write_file(root / "corpus" / (id + ".mid"), pieces[i].score);
      tsv << id << '\t' << to_string(pieces[i].genre) << '\n';
    }

    // A texture that drifts 1 px per frame, jumping by 6 px every 15 frames (one beat at 120 BPM).
    const auto base = toy::texture(96, 64, 3);
    int offset = 0;
    for (int f = 0; f < 64; ++f) {
      offset += f % 15 == 0 && f > 0 ? 6 : 1;
      char name[32];
      std::snprintf(name, sizeof name, "frame_%06d.pgm", f);
      video::write_pgm(root / "frames" / name, toy::translate(base, offset % 8, 0));
    }
    std::ofstream(root / "frames" / "manifest.json", std::ios::binary) << "{\"fps\": 30, \"tempo\": 120}\n";

    std::mt19937_64 rng(11);
    video::VideoRhythm r = toy::random_rhythm(rng, 30);
    r.total_frames = 1800;
    video::save_rhythm(root / "rhythm_60s.json", r);
    std::cout << "fixtures written to " << root.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "make_fixtures: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
