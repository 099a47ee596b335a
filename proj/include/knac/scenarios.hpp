#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "knac/dataset.hpp"

namespace knac {

/// Seeded synthetic workloads with a known ground truth. Cluster labels come
/// from the built-in k-means with k equal to the number of true blobs.
struct Scenario {
    std::string name;
    LabeledDataset dataset;
    std::vector<int> truth;  // generating blob of every row
};

/// Four blobs; the expert labelling lumps the last two into one label.
Scenario split_scenario(std::uint64_t seed);
/// Three blobs; the expert labelling scatters the first over two labels.
Scenario merge_scenario(std::uint64_t seed);
/// Eight blobs; three labels merged into one and another scattered over three.
Scenario corrupted_scenario(std::uint64_t seed);

Scenario make_scenario(const std::string& name, std::uint64_t seed);

}  // namespace knac
