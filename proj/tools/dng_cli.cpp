#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dng/dataset_io.hpp"
#include "dng/error.hpp"
#include "dng/log.hpp"
#include "dng/pipeline.hpp"
#include "dng/runtime.hpp"

namespace fs = std::filesystem;
using dng::json;

namespace {

// Flags shared by most subcommands. They are folded into the config JSON before it is
// parsed so derived seeds and validation see the final values.
struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string resolution;  // WxH
    std::optional<int> views;
    bool no_motion = false;
    std::optional<int> steps;
};

void add_common(CLI::App* app, Common& c, bool training) {
    app->add_option("--config", c.config, "JSON config (defaults are used for missing keys)")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "master seed");
    app->add_option("--resolution", c.resolution, "image size as WxH");
    if (training) {
        app->add_option("--views", c.views, "train on the first N views of the dataset");
        app->add_flag("--no-motion-features", c.no_motion, "drop the motion-feature channels from the descriptor");
        app->add_option("--steps", c.steps, "training iterations");
    }
}

dng::PipelineConfig build_config(const Common& c, bool gen_data) {
    json j = c.config.empty() ? json::object() : dng::read_json(c.config);
    if (c.seed) j["seed"] = *c.seed;
    if (!c.resolution.empty()) {
        int w = 0, h = 0;
        if (std::sscanf(c.resolution.c_str(), "%dx%d", &w, &h) != 2) throw dng::ConfigError("--resolution expects WxH");
        j["resolution"] = {w, h};
    }
    if (c.views) {
        if (gen_data) j["data"]["views"] = *c.views;
        else j["train"]["views"] = *c.views;
    }
    if (c.no_motion) j["descriptor"]["motion_features"] = false;
    if (c.steps) j["train"]["steps"] = *c.steps;
    return dng::config_from_json(j);
}

std::optional<fs::path> opt_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dng: neural garment rendering pipeline"};
    app.require_subcommand(1);

    Common common;
    std::string data, out, coarse, base, renderer, motion, camera, pred, gt;
    std::string pred_prefix = "frame", gt_prefix = "gt";
    bool relayer = false, dump_config = false;

    auto* gen = app.add_subcommand("gen-data", "simulate and render a synthetic dataset");
    add_common(gen, common, false);
    gen->add_option("--views", common.views, "number of camera views");
    gen->add_option("--out", out, "dataset directory")->required();

    auto* tc = app.add_subcommand("train-coarse", "train the shape codec and motion encoder");
    add_common(tc, common, false);
    tc->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    tc->add_option("--out", out, "checkpoint path")->required();

    auto* tr = app.add_subcommand("train-render", "train the neural texture, generator and discriminator");
    add_common(tr, common, true);
    tr->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    tr->add_option("--coarse", coarse, "coarse checkpoint; descriptors then use predicted coarse garments");
    tr->add_option("--out", out, "checkpoint path")->required();

    auto* rd = app.add_subcommand("render", "render a motion clip from a camera");
    add_common(rd, common, false);
    rd->add_option("--renderer", renderer, "renderer checkpoint")->required();
    rd->add_option("--coarse", coarse, "coarse checkpoint")->required();
    rd->add_option("--motion", motion, "clip JSON or dataset directory")->required();
    rd->add_option("--camera", camera, "camera JSON")->required();
    rd->add_option("--out", out, "output directory")->required();
    rd->add_flag("--relayer", relayer, "bring arms in front of the garment where the proxy says so");

    auto* ev = app.add_subcommand("evaluate", "compare rendered frames with ground truth");
    ev->add_option("--pred", pred, "directory of predicted frames")->required();
    ev->add_option("--gt", gt, "directory of ground-truth frames")->required();
    ev->add_option("--out", out, "metrics JSON path")->required();
    ev->add_option("--pred-prefix", pred_prefix, "predicted file prefix");
    ev->add_option("--gt-prefix", gt_prefix, "ground-truth file prefix");

    auto* fb = app.add_subcommand("finetune-body", "adapt a trained renderer to a new body shape");
    add_common(fb, common, true);
    fb->add_option("--base", base, "renderer checkpoint to start from")->required();
    fb->add_option("--data", data, "dataset with the new body shape")->required()->check(CLI::ExistingDirectory);
    fb->add_option("--coarse", coarse, "coarse checkpoint");
    fb->add_option("--out", out, "checkpoint path")->required();

    auto* fg = app.add_subcommand("finetune-bg", "adapt the refinement stage to a new background");
    add_common(fg, common, true);
    fg->add_option("--base", base, "renderer checkpoint to start from")->required();
    fg->add_option("--data", data, "dataset with the new background")->required()->check(CLI::ExistingDirectory);
    fg->add_option("--coarse", coarse, "coarse checkpoint");
    fg->add_option("--out", out, "checkpoint path")->required();

    auto* dc = app.add_subcommand("config", "print the effective config as JSON");
    add_common(dc, common, true);
    dc->add_flag("--dump", dump_config);

    CLI11_PARSE(app, argc, argv);
    dng::configure_runtime();

    try {
        if (ev->parsed()) {
            const auto m = dng::cmd_evaluate(pred, gt, out, pred_prefix, gt_prefix);
            dng::log::info("mu_mse ", m.mu_mse, " sigma_mse ", m.sigma_mse, " over ", m.per_frame_mse.size(), " frames");
            return 0;
        }
        const auto config = build_config(common, gen->parsed());
        if (gen->parsed()) {
            dng::cmd_gen_data(config, out);
        } else if (tc->parsed()) {
            dng::cmd_train_coarse(config, data, out);
        } else if (tr->parsed()) {
            dng::cmd_train_render(config, data, opt_path(coarse), out);
        } else if (rd->parsed()) {
            dng::cmd_render(config, {renderer, coarse, motion, camera, out, relayer || config.relayer});
        } else if (fb->parsed()) {
            dng::cmd_finetune_body(config, base, data, opt_path(coarse), out);
        } else if (fg->parsed()) {
            dng::cmd_finetune_background(config, base, data, opt_path(coarse), out);
        } else if (dc->parsed()) {
            std::printf("%s\n", dng::config_to_json(config).dump(2).c_str());
        }
    } catch (const dng::Error& e) {
        dng::log::error(e.what());
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        // library failures (torch, I/O) surface as numerical/runtime failures
        dng::log::error(e.what());
        return static_cast<int>(dng::ExitCode::kNumericalFailure);
    }
    return 0;
}
