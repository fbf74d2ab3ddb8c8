#pragma once
#include <string>
#include <utility>
#include <vector>

#include "pfn/backbones.hpp"

namespace pfn {

// Canonical parameter names and shapes for a spec, in construction order.
// Scalars use an empty shape.
std::vector<std::pair<std::string, std::vector<int64_t>>> param_layout(
    const ModelSpec& spec);

// Binary container: 8-byte magic "PFNCKPT1", u32 header length, ASCII
// key=value header lines, raw fp64 bucket edges, then name-sorted parameter
// blobs (u16 name length, name, u8 ndim, i64 dims, fp64 data), little endian.
// Round-trips bitwise.
void save_checkpoint(const std::string& path, const PFNModel& model);
PFNModel load_checkpoint(const std::string& path);

}  // namespace pfn
