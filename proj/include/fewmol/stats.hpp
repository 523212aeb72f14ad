#pragma once

#include <optional>
#include <vector>

namespace fewmol::stats {

// Ranks with ties averaged, 1-based.
std::vector<double> ranks(const std::vector<double>& v);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

// Spearman rank correlation; nullopt when either input is constant.
std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace fewmol::stats
