#include "vet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "json.hpp"
#include "vet/common.hpp"
#include "vet/nn/checkpoint.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace vet::pipeline {

namespace {

std::string volume_stem(const std::string& path) { return fs::path(path).stem().string(); }

std::string record_file(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "rec%06zu.octv", index);
    return buf;
}

}  // namespace

BFrameEnsemble preprocess_ensemble(const BFrameEnsemble& raw) {
    if (raw.nr() < 2) return raw;
    RegisterResult reg = register_frames(raw);
    AlineAlignResult aligned = align_alines(reg.ensemble);
    return std::move(aligned.ensemble);
}

FlowFrame apply_classical(const BFrameEnsemble& aligned, Algo algo, std::size_t repeats,
                          std::size_t k) {
    if (repeats > aligned.nr()) throw ArgumentError("classical: repeats exceed ensemble size");
    BFrameEnsemble sub;
    sub.y_index = aligned.y_index;
    sub.frames.assign(aligned.frames.begin(),
                      aligned.frames.begin() + static_cast<std::ptrdiff_t>(repeats));
    return algo == Algo::sv ? sv_octa(sub) : ed_octa(sub, k);
}

MultiRepeatVolume classical_flow_volume(const MultiRepeatVolume& vol, Algo algo,
                                        std::size_t repeats, std::size_t k) {
    if (repeats > vol.nr) throw ArgumentError("classical: repeats exceed volume repeat count");
    MultiRepeatVolume out(1, vol.ny, vol.nx, vol.nz);
    for (std::size_t y = 0; y < vol.ny; ++y) {
        const BFrameEnsemble aligned = preprocess_ensemble(slice_ensemble(vol, y));
        const FlowFrame flow = apply_classical(aligned, algo, repeats, k);
        std::copy(flow.data.begin(), flow.data.end(),
                  out.data.begin() + static_cast<std::ptrdiff_t>(out.index(0, y, 0, 0)));
    }
    return out;
}

std::vector<const SampleRecord*> Manifest::split(const std::string& name) const {
    std::vector<const SampleRecord*> out;
    for (const auto& r : records)
        if (r.split == name) out.push_back(&r);
    return out;
}

void save_manifest(const Manifest& m, const std::string& path) {
    json j;
    j["seed"] = m.seed;
    j["patch"] = m.patch;
    json recs = json::array();
    for (const auto& r : m.records) {
        recs.push_back({{"volume", r.volume_id},
                        {"y", r.y_index},
                        {"box", {{"x0", r.box.x0}, {"z0", r.box.z0}, {"size", r.box.size}}},
                        {"input", r.input_path},
                        {"target", r.target_path},
                        {"sv4", r.sv4_path},
                        {"ed4", r.ed4_path},
                        {"split", r.split}});
    }
    j["records"] = std::move(recs);
    write_file(path, j.dump(2) + "\n");
}

Manifest load_manifest(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw FormatError("manifest is not valid JSON: " + path + " (" + e.what() + ")");
    }
    Manifest m;
    try {
        m.seed = j.at("seed").get<std::uint64_t>();
        m.patch = j.at("patch").get<std::size_t>();
        for (const auto& r : j.at("records")) {
            SampleRecord rec;
            rec.volume_id = r.at("volume").get<std::string>();
            rec.y_index = r.at("y").get<std::size_t>();
            rec.box.x0 = r.at("box").at("x0").get<std::size_t>();
            rec.box.z0 = r.at("box").at("z0").get<std::size_t>();
            rec.box.size = r.at("box").at("size").get<std::size_t>();
            rec.input_path = r.at("input").get<std::string>();
            rec.target_path = r.at("target").get<std::string>();
            rec.sv4_path = r.at("sv4").get<std::string>();
            rec.ed4_path = r.at("ed4").get<std::string>();
            rec.split = r.at("split").get<std::string>();
            m.records.push_back(std::move(rec));
        }
    } catch (const json::exception& e) {
        throw FormatError("manifest field error: " + path + " (" + e.what() + ")");
    }
    return m;
}

Image2D load_patch(const std::string& path) { return volume_as_frame(load_volume(path)); }

void save_patch(const Image2D& img, const std::string& path) {
    save_volume(frame_as_volume(img), path);
}

Manifest build_dataset(const std::vector<std::string>& volume_paths, const std::string& out_dir,
                       const DatasetOptions& opt) {
    if (volume_paths.empty()) throw ArgumentError("dataset: no input volumes");
    if (opt.val_volumes >= volume_paths.size())
        throw ConfigError("dataset: validation volumes must leave at least one training volume");

    // split assignment by sorted volume id
    std::vector<std::string> ids;
    for (const auto& p : volume_paths) ids.push_back(volume_stem(p));
    {
        std::set<std::string> unique(ids.begin(), ids.end());
        if (unique.size() != ids.size()) throw ArgumentError("dataset: duplicate volume ids");
    }
    std::vector<std::string> sorted_ids(ids);
    std::sort(sorted_ids.begin(), sorted_ids.end());
    std::set<std::string> val_ids(sorted_ids.end() - static_cast<std::ptrdiff_t>(opt.val_volumes),
                                  sorted_ids.end());

    for (const char* sub : {"input", "target", "sv4", "ed4"})
        fs::create_directories(fs::path(out_dir) / sub);

    Manifest manifest;
    manifest.seed = opt.seed;
    manifest.patch = opt.patch;

    std::size_t rec_index = 0;
    for (std::size_t vi = 0; vi < volume_paths.size(); ++vi) {
        MultiRepeatVolume vol;
        try {
            vol = load_volume(volume_paths[vi]);
        } catch (const FormatError&) {
            throw;
        } catch (const Error& e) {
            throw IoError("dataset: cannot read volume " + volume_paths[vi] + ": " + e.what());
        }
        if (vol.nr < 4)
            throw ConfigError("dataset: volume " + ids[vi] + " has fewer than 4 repeats");
        if (vol.nx < opt.patch || vol.nz < opt.patch)
            throw ConfigError("dataset: volume " + ids[vi] + " frames are smaller than the patch size");

        const std::string split = val_ids.count(ids[vi]) ? "val" : "train";
        const auto boxes = extract_patch_boxes(vol.nx, vol.nz, opt.patch);

        for (std::size_t y = 0; y < vol.ny; ++y) {
            const BFrameEnsemble aligned = preprocess_ensemble(slice_ensemble(vol, y));
            const Image2D input =
                normalize_frame(aligned.frames[0], opt.lo_pct, opt.hi_pct);
            const Image2D target = normalize_frame(
                apply_classical(aligned, Algo::ed, aligned.nr(), opt.ed_k), opt.lo_pct, opt.hi_pct);
            const Image2D sv4 = normalize_frame(
                apply_classical(aligned, Algo::sv, opt.baseline_repeats), opt.lo_pct, opt.hi_pct);
            const Image2D ed4 = normalize_frame(
                apply_classical(aligned, Algo::ed, opt.baseline_repeats, opt.ed_k), opt.lo_pct,
                opt.hi_pct);

            for (const PatchBox& box : boxes) {
                SampleRecord rec;
                rec.volume_id = ids[vi];
                rec.y_index = y;
                rec.box = box;
                rec.split = split;
                const std::string file = record_file(rec_index++);
                rec.input_path = "input/" + file;
                rec.target_path = "target/" + file;
                rec.sv4_path = "sv4/" + file;
                rec.ed4_path = "ed4/" + file;
                save_patch(crop_patch(input, box), (fs::path(out_dir) / rec.input_path).string());
                save_patch(crop_patch(target, box), (fs::path(out_dir) / rec.target_path).string());
                save_patch(crop_patch(sv4, box), (fs::path(out_dir) / rec.sv4_path).string());
                save_patch(crop_patch(ed4, box), (fs::path(out_dir) / rec.ed4_path).string());
                manifest.records.push_back(std::move(rec));
            }
        }
    }

    save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

namespace {

// The six joint augmentations: identity, horizontal flip, vertical flip,
// rotations by 90/180/270. Patches are square.
Image2D apply_transform(const Image2D& img, int t) {
    const std::size_t n = img.nx;
    Image2D out(n, n);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t z = 0; z < n; ++z) {
            float v = 0.0f;
            switch (t) {
                case 0: v = img.at(x, z); break;
                case 1: v = img.at(n - 1 - x, z); break;            // horizontal flip
                case 2: v = img.at(x, n - 1 - z); break;            // vertical flip
                case 3: v = img.at(z, n - 1 - x); break;            // rotate 90
                case 4: v = img.at(n - 1 - x, n - 1 - z); break;    // rotate 180
                case 5: v = img.at(n - 1 - z, x); break;            // rotate 270
                default: throw ArgumentError("augment: unknown transform");
            }
            out.at(x, z) = v;
        }
    return out;
}

struct Sample {
    Image2D input;
    Image2D target;
};

nn::Tensor<float> batch_tensor(const std::vector<const Image2D*>& imgs) {
    const std::size_t n = imgs.size();
    const std::size_t h = imgs[0]->nx, w = imgs[0]->nz;
    std::vector<float> data(n * h * w);
    for (std::size_t i = 0; i < n; ++i)
        std::copy(imgs[i]->data.begin(), imgs[i]->data.end(), data.begin() + static_cast<std::ptrdiff_t>(i * h * w));
    return nn::Tensor<float>::from({n, h, w, 1}, std::move(data));
}

json config_json(const VetConfig& cfg, std::size_t patch) {
    return json{{"channels", cfg.channels},
                {"vfe_layers", cfg.vfe_layers},
                {"heads", cfg.heads},
                {"ffn_hidden", cfg.ffn_hidden},
                {"input_channels", cfg.input_channels},
                {"output_channels", cfg.output_channels},
                {"residual_scale", cfg.residual_scale},
                {"leaky_alpha", cfg.leaky_alpha},
                {"patch", patch}};
}

}  // namespace

void save_model(const VetModel<float>& model, std::size_t patch, const std::string& path) {
    nn::save_checkpoint(path, model.parameters());
    write_file(path + ".json", config_json(model.config(), patch).dump(2) + "\n");
}

LoadedModel load_model(const std::string& path) {
    LoadedModel lm;
    json j;
    try {
        j = json::parse(read_file(path + ".json"));
    } catch (const json::parse_error& e) {
        throw FormatError("model config sidecar is not valid JSON: " + path + ".json (" + e.what() + ")");
    }
    try {
        lm.config.channels = j.at("channels").get<std::size_t>();
        lm.config.vfe_layers = j.at("vfe_layers").get<std::size_t>();
        lm.config.heads = j.at("heads").get<std::size_t>();
        lm.config.ffn_hidden = j.at("ffn_hidden").get<std::size_t>();
        lm.config.input_channels = j.at("input_channels").get<std::size_t>();
        lm.config.output_channels = j.at("output_channels").get<std::size_t>();
        lm.config.residual_scale = j.at("residual_scale").get<double>();
        lm.config.leaky_alpha = j.at("leaky_alpha").get<double>();
        lm.patch = j.at("patch").get<std::size_t>();
    } catch (const json::exception& e) {
        throw ConfigError("model config sidecar field error: " + std::string(e.what()));
    }
    lm.model = std::make_unique<VetModel<float>>(lm.config, 0);
    auto entries = nn::load_checkpoint(path);
    auto params = lm.model->parameters();
    nn::apply_checkpoint(entries, params);
    return lm;
}

TrainResult train(const Manifest& manifest, const std::string& manifest_dir,
                  const TrainOptions& opt) {
    if (opt.batch < 1) throw ConfigError("train: batch must be >= 1");
    if (opt.epochs < 1 && opt.max_steps == 0) throw ConfigError("train: epochs must be >= 1");
    opt.model.validate();

    const auto train_records = manifest.split("train");
    if (train_records.empty()) throw ArgumentError("train: manifest has no training records");

    std::vector<Sample> samples;
    samples.reserve(train_records.size());
    for (const auto* rec : train_records) {
        Sample s;
        s.input = load_patch((fs::path(manifest_dir) / rec->input_path).string());
        s.target = load_patch((fs::path(manifest_dir) / rec->target_path).string());
        samples.push_back(std::move(s));
    }

    VetModel<float> model(opt.model, opt.seed);
    auto params = model.parameters();
    Rng rng(opt.seed);

    if (!opt.out_dir.empty()) fs::create_directories(opt.out_dir);

    TrainResult result;
    std::string log;
    std::vector<std::size_t> order(samples.size());
    const std::size_t steps_per_epoch = (samples.size() + opt.batch - 1) / opt.batch;
    const std::size_t total_steps =
        opt.max_steps > 0 ? opt.max_steps : opt.epochs * steps_per_epoch;

    std::size_t step = 0;
    for (std::size_t epoch = 1; step < total_steps; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        std::size_t visited = 0;
        for (std::size_t b = 0; b < steps_per_epoch && step < total_steps; ++b) {
            const std::size_t lo = b * opt.batch;
            const std::size_t hi = std::min(lo + opt.batch, samples.size());

            const int transform = opt.augment ? static_cast<int>(rng.uniform_int(0, 5)) : 0;
            std::vector<Image2D> aug_in, aug_tg;
            std::vector<const Image2D*> in_ptr, tg_ptr;
            for (std::size_t i = lo; i < hi; ++i) {
                const Sample& s = samples[order[i]];
                if (transform == 0) {
                    in_ptr.push_back(&s.input);
                    tg_ptr.push_back(&s.target);
                } else {
                    aug_in.push_back(apply_transform(s.input, transform));
                    aug_tg.push_back(apply_transform(s.target, transform));
                }
            }
            for (const auto& img : aug_in) in_ptr.push_back(&img);
            for (const auto& img : aug_tg) tg_ptr.push_back(&img);
            visited += in_ptr.size();

            nn::Tape<float> tape;
            auto x = batch_tensor(in_ptr);
            auto t = batch_tensor(tg_ptr);
            auto loss = nn::mse_loss(model.forward(x), t);
            const double loss_v = static_cast<double>(loss.item());
            ++step;
            if (!std::isfinite(loss_v))
                throw NumericError("train: non-finite loss at step " + std::to_string(step));
            if (step == 1) result.initial_loss = loss_v;
            result.final_loss = loss_v;

            tape.backward(loss);
            nn::adam_step(params, opt.adam);
            nn::zero_grads(params);

            char line[96];
            std::snprintf(line, sizeof(line), "%zu\t%zu\t%.9e\n", step, epoch, loss_v);
            log += line;

            if (opt.checkpoint_every > 0 && step % opt.checkpoint_every == 0 && !opt.out_dir.empty()) {
                save_model(model, manifest.patch,
                           (fs::path(opt.out_dir) / ("model_step" + std::to_string(step) + ".vetw"))
                               .string());
            }
        }
        result.visits_per_epoch.push_back(visited);
    }
    result.steps = step;
    result.loss_log = log;

    if (!opt.out_dir.empty()) {
        result.checkpoint_path = (fs::path(opt.out_dir) / "model.vetw").string();
        save_model(model, manifest.patch, result.checkpoint_path);
        write_file((fs::path(opt.out_dir) / "loss.tsv").string(), log);
    }
    return result;
}

namespace {

Image2D clamp01(Image2D img) {
    for (auto& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
    return img;
}

Image2D forward_patch(const VetModel<float>& model, const Image2D& patch) {
    auto x = nn::Tensor<float>::from({1, patch.nx, patch.nz, 1},
                                     std::vector<float>(patch.data.begin(), patch.data.end()));
    auto y = model.forward(x);
    Image2D out(patch.nx, patch.nz);
    std::copy(y.data().begin(), y.data().end(), out.data.begin());
    return out;
}

}  // namespace

Image2D infer_frame(const VetModel<float>& model, const Image2D& normalized_frame,
                    std::size_t patch) {
    const auto boxes = extract_patch_boxes(normalized_frame.nx, normalized_frame.nz, patch);
    std::vector<double> acc(normalized_frame.size(), 0.0);
    std::vector<std::uint32_t> count(normalized_frame.size(), 0);
    for (const PatchBox& box : boxes) {
        const Image2D pred = forward_patch(model, crop_patch(normalized_frame, box));
        for (std::size_t x = 0; x < patch; ++x)
            for (std::size_t z = 0; z < patch; ++z) {
                const std::size_t idx = (box.x0 + x) * normalized_frame.nz + (box.z0 + z);
                acc[idx] += static_cast<double>(pred.at(x, z));
                ++count[idx];
            }
    }
    Image2D out(normalized_frame.nx, normalized_frame.nz);
    for (std::size_t i = 0; i < acc.size(); ++i)
        out.data[i] = static_cast<float>(acc[i] / static_cast<double>(count[i]));
    return clamp01(std::move(out));
}

MultiRepeatVolume infer_volume(const VetModel<float>& model, const MultiRepeatVolume& vol,
                               std::size_t patch, double lo_pct, double hi_pct) {
    MultiRepeatVolume out(1, vol.ny, vol.nx, vol.nz);
    for (std::size_t y = 0; y < vol.ny; ++y) {
        Image2D frame(vol.nx, vol.nz);
        std::copy(vol.data.begin() + static_cast<std::ptrdiff_t>(vol.index(0, y, 0, 0)),
                  vol.data.begin() + static_cast<std::ptrdiff_t>(vol.index(0, y, 0, 0) + vol.nx * vol.nz),
                  frame.data.begin());
        const Image2D pred = infer_frame(model, normalize_frame(frame, lo_pct, hi_pct), patch);
        std::copy(pred.data.begin(), pred.data.end(),
                  out.data.begin() + static_cast<std::ptrdiff_t>(out.index(0, y, 0, 0)));
    }
    return out;
}

std::map<std::string, MetricReport> evaluate(const Manifest& manifest,
                                             const std::string& manifest_dir,
                                             const EvalOptions& opt) {
    const auto val = manifest.split("val");
    if (val.empty()) throw ArgumentError("eval: manifest has no validation records");
    if (opt.checkpoint.empty() == opt.predictions_dir.empty())
        throw ArgumentError("eval: exactly one of checkpoint or predictions directory is required");

    std::unique_ptr<VetModel<float>> model;
    if (!opt.checkpoint.empty()) {
        LoadedModel lm = load_model(opt.checkpoint);
        if (lm.patch != manifest.patch)
            throw ConfigError("eval: checkpoint patch size does not match manifest");
        model = std::move(lm.model);
    }

    std::vector<Image2D> targets, inputs, sv4s, ed4s, preds;
    targets.reserve(val.size());
    for (const auto* rec : val) {
        targets.push_back(load_patch((fs::path(manifest_dir) / rec->target_path).string()));
        inputs.push_back(load_patch((fs::path(manifest_dir) / rec->input_path).string()));
        sv4s.push_back(load_patch((fs::path(manifest_dir) / rec->sv4_path).string()));
        ed4s.push_back(load_patch((fs::path(manifest_dir) / rec->ed4_path).string()));
        if (model) {
            Image2D pred = forward_patch(*model, inputs.back());
            for (auto& v : pred.data) v = std::clamp(v, 0.0f, 1.0f);
            preds.push_back(std::move(pred));
        } else {
            const std::string base = fs::path(rec->input_path).filename().string();
            const fs::path p = fs::path(opt.predictions_dir) / base;
            if (!fs::exists(p))
                throw IoError("eval: missing prediction for record " + rec->volume_id + "/y" +
                              std::to_string(rec->y_index) + " (" + base + ")");
            preds.push_back(clamp01(load_patch(p.string())));
        }
    }

    const auto pair_up = [&targets](const std::vector<Image2D>& xs) {
        std::vector<std::pair<const Image2D*, const Image2D*>> pairs;
        pairs.reserve(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) pairs.emplace_back(&xs[i], &targets[i]);
        return pairs;
    };

    std::map<std::string, MetricReport> reports;
    reports["input"] = evaluate_set(pair_up(inputs));
    reports["sv4"] = evaluate_set(pair_up(sv4s));
    reports["ed4"] = evaluate_set(pair_up(ed4s));
    reports["vet"] = evaluate_set(pair_up(preds));
    return reports;
}

std::string evaluation_json(const std::map<std::string, MetricReport>& reports) {
    const auto stats_json = [](const MetricStats& s) {
        return json{{"mean", s.mean}, {"std", s.std_dev}, {"n", s.n}};
    };
    json methods;
    for (const auto& [name, rep] : reports) {
        methods[name] = json{{"psnr", stats_json(rep.psnr)},
                             {"ssim", stats_json(rep.ssim)},
                             {"ms_ssim", stats_json(rep.ms_ssim)},
                             {"psnr_infinite_excluded", rep.psnr_infinite_excluded},
                             {"per_image",
                              {{"psnr", rep.psnr_values},
                               {"ssim", rep.ssim_values},
                               {"ms_ssim", rep.ms_ssim_values}}}};
    }
    return json{{"methods", methods}}.dump(2) + "\n";
}

}  // namespace vet::pipeline
