// Regenerates the shipped data files: vocab.txt and prompts.txt.

#include "branchwm/codec.hpp"
#include "branchwm/forensic.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: bwm-datagen <data-dir>\n";
        return 2;
    }
    const std::filesystem::path dir = argv[1];
    std::filesystem::create_directories(dir);
    bwm::Vocab::toy().save(dir / "vocab.txt");
    std::ofstream prompts(dir / "prompts.txt", std::ios::trunc);
    for (const auto& p : bwm::forensic::story_prompts(500, bwm::forensic::kCorpusSeed)) prompts << p << '\n';
    return prompts ? 0 : 1;
}
