#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "knac/matrix.hpp"

namespace knac {

enum class LinkageKind { single, complete, average, centroid };

const char* to_string(LinkageKind kind);
LinkageKind linkage_from_string(const std::string& s);

struct AgreementScores {
    double homogeneity = 0.0;
    double completeness = 0.0;
    double v_measure = 0.0;

    bool operator==(const AgreementScores&) const = default;
};

inline constexpr std::size_t kDefaultSilhouetteCap = 2000;

/// Mean silhouette over the rows of `features` (Euclidean). When there are
/// more rows than `subsample_cap`, a seeded uniform sample without
/// replacement is scored instead and distances are taken inside the sample.
/// Points alone in their cluster score 0.
double silhouette(const RealMatrix& features, std::span<const int> labels,
                  std::size_t subsample_cap = kDefaultSilhouetteCap, std::uint64_t seed = 0);

/// Number of silhouette() evaluations performed by this thread so far.
std::uint64_t silhouette_evaluations() noexcept;

double euclidean(std::span<const double> a, std::span<const double> b);

double linkage_distance(const RealMatrix& features, std::span<const int> labels, int a, int b,
                        LinkageKind kind);

/// Pairwise linkage distances between labels 0..k-1 divided by the dataset
/// diameter, clamped to [0, 1]. Diagonal is 0.
RealMatrix linkage_matrix_normalized(const RealMatrix& features, std::span<const int> labels,
                                     LinkageKind kind);

/// Largest pairwise Euclidean distance between rows.
double diameter(const RealMatrix& features);

AgreementScores agreement(std::span<const int> reference, std::span<const int> predicted);

void to_json(nlohmann::json& j, const AgreementScores& s);
void from_json(const nlohmann::json& j, AgreementScores& s);

}  // namespace knac
