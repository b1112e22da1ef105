#pragma once

#include <cstdint>
#include <string>

#include "dfecs/error.hpp"

namespace dfecs {

enum class DictionaryInit { DataColumns };
enum class NmfInit { Nndsvd, Random };

struct SolverConfig {
    int max_iterations = 500;
    /// Stop when |f_prev - f| <= tolerance * |f_prev|.
    double tolerance = 1e-6;
    std::uint64_t seed = 0;
    DictionaryInit dictionary_init = DictionaryInit::DataColumns;
    NmfInit nmf_init = NmfInit::Nndsvd;

    void validate() const {
        if (max_iterations < 1) throw Error(ErrorKind::ConfigError, "max_iterations must be at least 1");
        if (!(tolerance > 0.0)) throw Error(ErrorKind::ConfigError, "tolerance must be positive");
    }
};

}  // namespace dfecs
