#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "dng/checkpoint.hpp"
#include "dng/dataset_io.hpp"
#include "dng/image_io.hpp"

using namespace dng;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("dng_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(Checkpoint, RoundTrip) {
    const auto dir = scratch("ckpt");
    Checkpoint c;
    c.kind = "renderer";
    c.config = {{"a", 1}};
    c.descriptor = {{"joint_count", 19}};
    c.add("w", torch::arange(6, torch::kFloat32).reshape({2, 3}));
    c.add("b", torch::tensor({-1.5f}));
    save_checkpoint(dir / "x.ckpt", c);
    const auto l = load_checkpoint(dir / "x.ckpt");
    EXPECT_EQ(l.kind, "renderer");
    EXPECT_EQ(l.config, c.config);
    EXPECT_EQ(l.descriptor, c.descriptor);
    EXPECT_TRUE(torch::equal(l.get("w"), c.get("w")));
    EXPECT_TRUE(torch::equal(l.get("b"), c.get("b")));
    EXPECT_THROW(l.get("missing"), SchemaMismatch);
}

TEST(Checkpoint, RejectsCorruptFiles) {
    const auto dir = scratch("ckpt_bad");
    EXPECT_THROW(load_checkpoint(dir / "nope.ckpt"), ConfigError);
    {
        std::ofstream f(dir / "magic.ckpt", std::ios::binary);
        f << "NOTACKPT and some more bytes";
    }
    EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), SchemaMismatch);

    Checkpoint c;
    c.kind = "k";
    c.add("w", torch::ones({100}));
    save_checkpoint(dir / "t.ckpt", c);
    fs::resize_file(dir / "t.ckpt", fs::file_size(dir / "t.ckpt") - 8);
    try {
        load_checkpoint(dir / "t.ckpt");
        FAIL();
    } catch (const SchemaMismatch& e) {
        EXPECT_EQ(static_cast<int>(e.code()), 4);
    }
}

TEST(Checkpoint, DescriptorMismatchIsSchemaError) {
    const json a{{"sigma", 0.7225}, {"motion_maps", 6}};
    json b = a;
    require_same_descriptor(a, b);
    b["motion_maps"] = 5;
    EXPECT_THROW(require_same_descriptor(a, b), SchemaMismatch);
    json c = a;
    c["extra"] = 1;
    EXPECT_THROW(require_same_descriptor(a, c), SchemaMismatch);
}

TEST(Checkpoint, JsonHashIgnoresKeyOrder) {
    const auto a = json::parse(R"({"x":1,"y":[1,2]})");
    const auto b = json::parse(R"({"y":[1,2],"x":1})");
    EXPECT_EQ(json_hash(a), json_hash(b));
    EXPECT_EQ(json_hash(a).size(), 16u);
    EXPECT_NE(json_hash(a), json_hash(json::parse(R"({"x":2,"y":[1,2]})")));
    // FNV-1a reference values
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Checkpoint, ModuleRoundTripAndShapeCheck) {
    const auto dir = scratch("module");
    torch::nn::Linear a(3, 2), b(3, 2), wrong(4, 2);
    Checkpoint c;
    add_module(c, "lin", *a);
    save_checkpoint(dir / "m.ckpt", c);
    const auto l = load_checkpoint(dir / "m.ckpt");
    load_module(l, "lin", *b);
    EXPECT_TRUE(torch::equal(a->weight, b->weight));
    EXPECT_THROW(load_module(l, "lin", *wrong), SchemaMismatch);
    EXPECT_THROW(load_module(l, "other", *b), SchemaMismatch);
}

TEST(ImageIo, PngRoundTripQuantizes) {
    const auto dir = scratch("png");
    Image img(4, 5, 3, ImageKind::kRgb);
    for (size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<float>(i % 7) / 6.0f;
    write_png(dir / "a.png", img);
    const auto back = read_png(dir / "a.png");
    ASSERT_TRUE(back.same_shape(img));
    const auto q = quantize_8bit(img);
    EXPECT_EQ(back.pixels, q.pixels);
    for (size_t i = 0; i < img.pixels.size(); ++i) EXPECT_NEAR(back.pixels[i], img.pixels[i], 0.5f / 255.0f + 1e-6f);
}

TEST(DatasetIo, CameraAndClipJsonRoundTrip) {
    const auto cam = Camera::look_at({1, 2, 3}, {0, 0.7f, 0}, 0.6f, 64, 48, 7);
    const auto back = camera_from_json(camera_to_json(cam));
    EXPECT_EQ(back.view_id, 7);
    EXPECT_TRUE(back.rotation.isApprox(cam.rotation));
    EXPECT_TRUE(back.translation.isApprox(cam.translation));
    EXPECT_FLOAT_EQ(back.fx, cam.fx);

    SkeletonPose p;
    p.joints = {Vec3(0, 1, 0), Vec3(1, 2, 3)};
    const MotionClip clip({p, p}, 24.0);
    const auto c2 = clip_from_json(clip_to_json(clip));
    EXPECT_EQ(c2.frame_count(), 2);
    EXPECT_EQ(c2.fps(), 24.0);
    EXPECT_EQ(c2.pose(1).joints, p.joints);
    EXPECT_THROW(clip_from_json(json{{"fps", 30}}), ConfigError);
}

TEST(DatasetIo, F32RoundTrip) {
    const auto dir = scratch("f32");
    const std::vector<float> v{1.0f, -2.5f, 3e-7f};
    write_f32(dir / "a.f32", v);
    EXPECT_EQ(read_f32(dir / "a.f32"), v);
    EXPECT_EQ(fs::file_size(dir / "a.f32"), 12u);
}
