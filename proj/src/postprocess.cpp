#include "dng/postprocess.hpp"

#include <algorithm>

namespace dng {

namespace {

void check(const LayerInputs& in) {
    const auto& r = in.render;
    if (r.channels != 3 || !in.body.same_shape(r)) throw SchemaMismatch("relayer: render and body must be same-size rgb");
    for (const Image* m : {&in.arm_mask, &in.garment_mask}) {
        if (m->channels != 1 || m->width != r.width || m->height != r.height) {
            throw SchemaMismatch("relayer: masks must be single-channel at the render size");
        }
    }
    const std::size_t n = static_cast<std::size_t>(r.width) * r.height;
    if (in.arm_depth.size() != n || in.garment_depth.size() != n) throw SchemaMismatch("relayer: depth size mismatch");
}

}  // namespace

std::vector<std::size_t> relayer_pixels(const LayerInputs& in) {
    check(in);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < in.arm_depth.size(); ++i) {
        if (in.arm_mask.pixels[i] < 0.5f || in.garment_mask.pixels[i] < 0.5f) continue;
        const float arm = in.arm_depth[i], garment = in.garment_depth[i];
        if (arm > 0.0f && garment > 0.0f && arm < garment - in.delta) out.push_back(i);
    }
    return out;
}

Image relayer(const LayerInputs& in) {
    Image out = in.render;
    for (std::size_t i : relayer_pixels(in)) {
        std::copy_n(in.body.pixels.begin() + static_cast<std::ptrdiff_t>(i * 3), 3, out.pixels.begin() + static_cast<std::ptrdiff_t>(i * 3));
    }
    return out;
}

}  // namespace dng
