#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "flg/world.hpp"

namespace testutil {

inline flg::BlockSpec rect_block(int id, double cx, double cy, double w, double h, double yaw = 0.0) {
    flg::BlockSpec b;
    b.id = id;
    b.footprint = {{-w / 2, -h / 2}, {w / 2, -h / 2}, {w / 2, h / 2}, {-w / 2, h / 2}};
    b.height = 1.0;
    b.pose = {cx, cy, yaw};
    return b;
}

inline flg::WorldState scene(std::initializer_list<flg::BlockSpec> blocks) {
    flg::WorldState s;
    s.blocks = blocks;
    return s;
}

/// Fresh empty directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("flg_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testutil
