// Writes the synthetic lexical-sample corpus used by the learnability tests.
//
//   make_synthetic OUTDIR [SEED]

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <string>

#include "wsd/synthetic.hpp"

int main(int argc, char** argv) {
  if (argc < 2 || argc > 3) {
    std::fprintf(stderr, "usage: %s OUTDIR [SEED]\n", argv[0]);
    return 1;
  }
  try {
    wsd::SyntheticConfig cfg;
    if (argc == 3) cfg.seed = std::stoull(argv[2]);
    std::filesystem::create_directories(argv[1]);
    const auto corpus = wsd::make_synthetic_corpus(cfg);
    wsd::write_synthetic_corpus(corpus, argv[1]);
    std::printf("%zu training and %zu held-out instances, %zu words\n", corpus.train.size(), corpus.heldout.size(),
                corpus.words.size());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
