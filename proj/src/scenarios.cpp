#include "knac/scenarios.hpp"

#include <stdexcept>

#include "knac/kmeans.hpp"

namespace knac {

namespace {

Scenario build(std::string name, BlobSpec spec, const std::vector<std::vector<int>>& merges,
               const std::vector<LabelSplit>& splits, std::uint64_t seed) {
    LabeledDataset blobs = generate_blobs(spec);
    Scenario s;
    s.name = std::move(name);
    s.truth = blobs.expert_labels;
    LabeledDataset ds = corrupt_labels(blobs, merges, splits).dataset;
    KMeansConfig km;
    km.k = spec.n_blobs;
    km.seed = seed;
    s.dataset = with_cluster_labels(ds, kmeans(ds.features, km));
    return s;
}

}  // namespace

Scenario split_scenario(std::uint64_t seed) {
    BlobSpec spec;
    spec.n_blobs = 4;
    spec.points_per_blob = 100;
    spec.centers = {{0.0, 0.0}, {12.0, 0.0}, {0.0, 12.0}, {12.0, 12.0}};
    spec.seed = seed;
    return build("split", spec, {{2, 3}}, {}, seed);
}

Scenario merge_scenario(std::uint64_t seed) {
    BlobSpec spec;
    spec.n_blobs = 3;
    spec.points_per_blob = 100;
    spec.centers = {{0.0, 0.0}, {12.0, 0.0}, {6.0, 10.0}};
    spec.seed = seed;
    return build("merge", spec, {}, {{0, 2, seed + 1}}, seed);
}

Scenario corrupted_scenario(std::uint64_t seed) {
    BlobSpec spec;
    spec.n_blobs = 8;
    spec.points_per_blob = 100;
    for (int row = 0; row < 2; ++row)
        for (int col = 0; col < 4; ++col) spec.centers.push_back({12.0 * col, 12.0 * row});
    spec.seed = seed;
    return build("corrupted", spec, {{0, 1, 2}}, {{5, 3, seed + 1}}, seed);
}

Scenario make_scenario(const std::string& name, std::uint64_t seed) {
    if (name == "split") return split_scenario(seed);
    if (name == "merge") return merge_scenario(seed);
    if (name == "corrupted") return corrupted_scenario(seed);
    throw std::invalid_argument("unknown scenario '" + name + "' (expected split, merge or corrupted)");
}

}  // namespace knac
