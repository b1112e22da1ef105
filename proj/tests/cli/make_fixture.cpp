// Writes the synthetic inputs used by the command-line tests:
//   planted.csv  standardized keypoints whose KPMs follow a planted two-level model
//   facs26.aus   an external 136 x 26 AU matrix
//   corrupt.aus, bad_config.json  inputs that must be rejected
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "dfecs/io/archive.hpp"
#include "dfecs/io/csv.hpp"
#include "support/fixtures.hpp"

using namespace dfecs;

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_fixture <output-dir>\n";
        return 2;
    }
    const std::filesystem::path dir = argv[1];
    std::filesystem::create_directories(dir);

    constexpr int kSubjects = 3;
    constexpr Eigen::Index kColumns = 600;
    const testing::PlantedModel pm = testing::planted_model(kColumns, 17);
    const Points face = testing::synthetic_face();

    std::vector<StandardizedFrame> frames;
    for (int s = 0; s < kSubjects; ++s) {
        StandardizedFrame neutral;
        neutral.subject_id = "p" + std::to_string(s);
        neutral.frame_index = 0;
        neutral.is_neutral = true;
        neutral.coords = face;
        neutral.validity.set();
        frames.push_back(neutral);
        for (Eigen::Index j = s; j < kColumns; j += kSubjects) {
            StandardizedFrame f = neutral;
            f.is_neutral = false;
            f.frame_index = static_cast<std::size_t>(j / kSubjects + 1);
            f.coords += Eigen::Map<const Points>(pm.data.col(j).data());
            frames.push_back(f);
        }
    }
    std::ostringstream csv;
    io::write_keypoints_csv(csv, frames);
    io::write_text_file(dir / "planted.csv", csv.str());

    std::mt19937_64 rng(26);
    const AuMatrix facs{"facs26", testing::gaussian(kKpmDim, 26, rng).colwise().normalized(), AuProvenance::ExternalFacs};
    io::save_au_matrix(facs, dir / "facs26.aus");

    std::string corrupt = io::serialize_au_matrix(facs);
    const std::size_t digit = corrupt.find_first_of("12345678", corrupt.find('\n', corrupt.find("matrix AU")) + 1);
    corrupt[digit] = static_cast<char>(corrupt[digit] + 1);
    io::write_text_file(dir / "corrupt.aus", corrupt);
    io::write_text_file(dir / "bad_config.json", R"({"betta": 0.05})");
    std::cout << "fixtures -> " << dir.string() << '\n';
    return 0;
}
