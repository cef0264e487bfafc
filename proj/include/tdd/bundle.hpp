#pragma once

#include <string>
#include <vector>

namespace tdd {

// Named-tensor bundle: `<base>.tb.json` manifest (list of {name, shape,
// offset}, offsets in bytes) plus `<base>.tb.bin` of concatenated
// little-endian f32 values, in manifest order.
struct BundleEntry {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
};

void save_bundle(const std::vector<BundleEntry>& entries, const std::string& base);
std::vector<BundleEntry> load_bundle(const std::string& base);

} // namespace tdd
