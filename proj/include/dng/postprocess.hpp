#pragma once

// Image-space arm re-layering: where an arm lies in front of the garment proxy but the
// synthesized garment covers it, the body render's pixel is brought back to the front.

#include <span>
#include <vector>

#include "dng/domain.hpp"

namespace dng {

struct LayerInputs {
    const Image& render;        // R, rgb
    const Image& body;          // undressed body render, rgb
    const Image& arm_mask;      // 1 channel, binary
    const Image& garment_mask;  // 1 channel, binary (A > 0.5)
    std::span<const float> arm_depth;      // H*W camera depth, 0 where no arm
    std::span<const float> garment_depth;  // H*W coarse-proxy depth, 0 where no proxy
    float delta = 0.01f;                   // meters
};

/// Pixels (flat indices) that relayer takes from the body render.
std::vector<std::size_t> relayer_pixels(const LayerInputs& in);

/// Throws SchemaMismatch when inputs differ in size or a mask is not single-channel.
Image relayer(const LayerInputs& in);

}  // namespace dng
