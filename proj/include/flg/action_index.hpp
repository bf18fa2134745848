#pragma once

#include <cstddef>

namespace flg {

inline constexpr int kGraspChannel = 0;
inline constexpr int kMoveChannel = 1;

/// One entry of the dense Q-map: rotation, channel and rotated-frame pixel.
struct ActionIndex {
    int rotation = 0;
    int channel = kGraspChannel;
    int px = 0;
    int py = 0;

    /// Offset into a [r][c][y][x] array with the given plane size.
    std::size_t flat(int channels, int height, int width) const {
        return ((static_cast<std::size_t>(rotation) * channels + channel) * height + py) * width + px;
    }
    static ActionIndex from_flat(std::size_t i, int channels, int height, int width) {
        ActionIndex a;
        a.px = static_cast<int>(i % width);
        i /= width;
        a.py = static_cast<int>(i % height);
        i /= height;
        a.channel = static_cast<int>(i % channels);
        a.rotation = static_cast<int>(i / channels);
        return a;
    }

    friend bool operator==(const ActionIndex&, const ActionIndex&) = default;
};

}  // namespace flg
