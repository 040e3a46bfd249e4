#pragma once

#include <filesystem>
#include <string>

#include "mhntf/hierarchy.hpp"

namespace mhntf {

/// Chain document, format version 1:
///
///   {"format": "mhntf-chain", "version": 1, "method": ..., "seed": ...,
///    "ranks": [...], "options": [{"max_iters", "tol", "seed", "epsilon"}],
///    "layers": [{"rank", "relative_loss", "absolute_loss",
///                "factors": [matrix, ...], "mixing": matrix | null,
///                "label_dictionary": matrix | null}]}
///
/// with matrix = {"rows": m, "cols": n, "data": [row-major values]}.
/// Doubles are written in shortest round-trip form, so save/load is exact.
/// A layer's rank is its nominal r_l; hncpd layers keep rank-r_0 factors.
std::string chain_to_json(const LayerChain& chain);

/// Throws LoadError (line 0) on a malformed or inconsistent document.
LayerChain chain_from_json(const std::string& text, const std::string& source = "<memory>");

void save_chain(const std::filesystem::path& path, const LayerChain& chain);
LayerChain load_chain(const std::filesystem::path& path);

}  // namespace mhntf
