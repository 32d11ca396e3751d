// vetoct: phantom generation, dataset construction, classical OCTA, network
// training, inference and evaluation from one binary.
//
// Exit codes: 0 success, 2 argument/config error, 3 data/format error,
// 4 numeric failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vet/common.hpp"
#include "vet/config.hpp"
#include "vet/metrics.hpp"
#include "vet/phantom.hpp"
#include "vet/pipeline.hpp"
#include "vet/png_io.hpp"

namespace fs = std::filesystem;
using namespace vet;

namespace {

struct Ctx {
    ConfigFile cfg;

    long long geti(const CLI::Option* opt, long long flag_value, const std::string& key,
                   long long fallback) const {
        return opt->count() ? flag_value : cfg.get_int(key, fallback);
    }
    double getd(const CLI::Option* opt, double flag_value, const std::string& key,
                double fallback) const {
        return opt->count() ? flag_value : cfg.get_double(key, fallback);
    }
    std::string gets(const CLI::Option* opt, const std::string& flag_value, const std::string& key,
                     const std::string& fallback) const {
        return opt->count() ? flag_value : cfg.get_string(key, fallback);
    }
    bool getb(const CLI::Option* opt, bool flag_value, const std::string& key, bool fallback) const {
        return opt->count() ? flag_value : cfg.get_bool(key, fallback);
    }
};

std::string zero_pad(std::size_t v, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*zu", width, v);
    return buf;
}

PhantomConfig phantom_config_from(const Ctx& ctx, const std::map<std::string, const CLI::Option*>& o,
                                  const std::map<std::string, long long>& iv,
                                  const std::map<std::string, double>& dv) {
    PhantomConfig pc;
    pc.nr = static_cast<std::size_t>(ctx.geti(o.at("nr"), iv.at("nr"), "phantom.nr", 6));
    pc.nx = static_cast<std::size_t>(ctx.geti(o.at("nx"), iv.at("nx"), "phantom.nx", 64));
    pc.ny = static_cast<std::size_t>(ctx.geti(o.at("ny"), iv.at("ny"), "phantom.ny", 64));
    pc.nz = static_cast<std::size_t>(ctx.geti(o.at("nz"), iv.at("nz"), "phantom.nz", 64));
    pc.vessel_count =
        static_cast<std::size_t>(ctx.geti(o.at("vessels"), iv.at("vessels"), "phantom.vessels", 3));
    pc.radius_min = ctx.getd(o.at("radius_min"), dv.at("radius_min"), "phantom.radius_min", 2.0);
    pc.radius_max = ctx.getd(o.at("radius_max"), dv.at("radius_max"), "phantom.radius_max", 4.0);
    pc.speckle_sigma =
        ctx.getd(o.at("speckle_sigma"), dv.at("speckle_sigma"), "phantom.speckle_sigma", 0.3);
    pc.decorrelation =
        ctx.getd(o.at("decorrelation"), dv.at("decorrelation"), "phantom.decorrelation", 1.0);
    pc.bulk_motion = static_cast<int>(
        ctx.geti(o.at("bulk_motion"), iv.at("bulk_motion"), "phantom.bulk_motion", 0));
    pc.seed = static_cast<std::uint64_t>(ctx.geti(o.at("seed"), iv.at("seed"), "phantom.seed", 1));
    return pc;
}

int run(int argc, char** argv) {
    CLI::App app{"single-scan OCTA vasculature extraction pipeline"};
    app.require_subcommand(1);

    Ctx ctx;
    std::string config_path;

    // ---- phantom gen ----
    auto* phantom = app.add_subcommand("phantom", "synthetic phantom volumes");
    auto* gen = phantom->add_subcommand("gen", "generate phantom scan volumes");
    std::string gen_out;
    long long gen_count = 1;
    std::map<std::string, long long> gi{{"nr", 6},     {"nx", 64},         {"ny", 64},
                                        {"nz", 64},    {"vessels", 3},     {"bulk_motion", 0},
                                        {"seed", 1}};
    std::map<std::string, double> gd{{"radius_min", 2.0},
                                     {"radius_max", 4.0},
                                     {"speckle_sigma", 0.3},
                                     {"decorrelation", 1.0}};
    std::map<std::string, const CLI::Option*> go;
    gen->add_option("--config", config_path, "TOML config file");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--count", gen_count, "number of volumes (seeds seed..seed+count-1)");
    go["nr"] = gen->add_option("--nr", gi["nr"], "repeat count");
    go["nx"] = gen->add_option("--nx", gi["nx"], "lateral pixels");
    go["ny"] = gen->add_option("--ny", gi["ny"], "slow-axis pixels");
    go["nz"] = gen->add_option("--nz", gi["nz"], "axial pixels");
    go["vessels"] = gen->add_option("--vessels", gi["vessels"], "vessel count");
    go["bulk_motion"] = gen->add_option("--bulk-motion", gi["bulk_motion"], "max |shift| per repeat");
    go["seed"] = gen->add_option("--seed", gi["seed"], "rng seed");
    go["radius_min"] = gen->add_option("--radius-min", gd["radius_min"], "vessel radius lower bound");
    go["radius_max"] = gen->add_option("--radius-max", gd["radius_max"], "vessel radius upper bound");
    go["speckle_sigma"] =
        gen->add_option("--speckle-sigma", gd["speckle_sigma"], "static speckle Rayleigh scale");
    go["decorrelation"] =
        gen->add_option("--decorrelation", gd["decorrelation"], "vessel decorrelation in [0,1]");

    // ---- dataset build ----
    auto* dataset = app.add_subcommand("dataset", "training/validation dataset");
    auto* build = dataset->add_subcommand("build", "build patch dataset from scan volumes");
    std::vector<std::string> ds_volumes;
    std::string ds_out;
    long long ds_patch = 192, ds_val = 1, ds_k = 1, ds_seed = 1, ds_gen = 0, ds_baseline = 4;
    double ds_lo = 0.0, ds_hi = 99.9;
    build->add_option("--config", config_path, "TOML config file");
    build->add_option("--volumes", ds_volumes, "input volume files");
    auto* o_gen = build->add_option("--gen-phantoms", ds_gen,
                                    "generate this many phantoms first (uses [phantom] config)");
    build->add_option("--out", ds_out, "output directory")->required();
    auto* o_patch = build->add_option("--patch", ds_patch, "patch size");
    auto* o_val = build->add_option("--val-volumes", ds_val, "volumes reserved for validation");
    auto* o_k = build->add_option("--ed-k", ds_k, "eigencomponents removed for targets");
    auto* o_base = build->add_option("--baseline-repeats", ds_baseline, "baseline repeat count");
    auto* o_lo = build->add_option("--lo-pct", ds_lo, "low normalization percentile");
    auto* o_hi = build->add_option("--hi-pct", ds_hi, "high normalization percentile");
    auto* o_seed = build->add_option("--seed", ds_seed, "dataset seed");
    std::map<std::string, long long> bgi{{"nr", 6},     {"nx", 64},         {"ny", 64},
                                         {"nz", 64},    {"vessels", 3},     {"bulk_motion", 0},
                                         {"seed", 1}};
    std::map<std::string, double> bgd{{"radius_min", 2.0},
                                      {"radius_max", 4.0},
                                      {"speckle_sigma", 0.3},
                                      {"decorrelation", 1.0}};
    std::map<std::string, const CLI::Option*> bgo;
    bgo["nr"] = build->add_option("--phantom-nr", bgi["nr"], "phantom repeat count");
    bgo["nx"] = build->add_option("--phantom-nx", bgi["nx"], "");
    bgo["ny"] = build->add_option("--phantom-ny", bgi["ny"], "");
    bgo["nz"] = build->add_option("--phantom-nz", bgi["nz"], "");
    bgo["vessels"] = build->add_option("--phantom-vessels", bgi["vessels"], "");
    bgo["bulk_motion"] = build->add_option("--phantom-bulk-motion", bgi["bulk_motion"], "");
    bgo["seed"] = build->add_option("--phantom-seed", bgi["seed"], "");
    bgo["radius_min"] = build->add_option("--phantom-radius-min", bgd["radius_min"], "");
    bgo["radius_max"] = build->add_option("--phantom-radius-max", bgd["radius_max"], "");
    bgo["speckle_sigma"] = build->add_option("--phantom-speckle-sigma", bgd["speckle_sigma"], "");
    bgo["decorrelation"] = build->add_option("--phantom-decorrelation", bgd["decorrelation"], "");

    // ---- octa ----
    auto* octa = app.add_subcommand("octa", "classical flow extraction (sv or ed)");
    std::string oc_volume, oc_algo = "ed", oc_out;
    long long oc_repeats = 0, oc_kk = 1, oc_z0 = 0, oc_z1 = 0, oc_depth = 8;
    octa->add_option("--config", config_path, "TOML config file");
    octa->add_option("--volume", oc_volume, "input volume file")->required();
    auto* o_algo = octa->add_option("--algo", oc_algo, "sv or ed");
    auto* o_rep = octa->add_option("--repeats", oc_repeats, "repeats used (default: all)");
    auto* o_ock = octa->add_option("--k", oc_kk, "eigencomponents removed (ed only)");
    octa->add_option("--out", oc_out, "output directory")->required();
    octa->add_option("--mip-z0", oc_z0, "enface depth range start");
    octa->add_option("--mip-z1", oc_z1, "enface depth range end (default: full depth)");
    octa->add_option("--png-depth", oc_depth, "enface PNG bit depth (8 or 16)");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train the extraction network");
    std::string tr_manifest, tr_out;
    long long tr_batch = 4, tr_epochs = 200, tr_steps = 0, tr_seed = 1, tr_ckpt = 0;
    long long tr_channels = 64, tr_layers = 4, tr_heads = 4, tr_ffn = 256;
    double tr_lr = 1e-4, tr_b1 = 0.8, tr_b2 = 0.999, tr_beta = 0.4;
    bool tr_no_aug = false, tr_det = true;
    train_cmd->add_option("--config", config_path, "TOML config file");
    train_cmd->add_option("--manifest", tr_manifest, "dataset manifest")->required();
    train_cmd->add_option("--out", tr_out, "output directory")->required();
    auto* t_batch = train_cmd->add_option("--batch", tr_batch, "batch size");
    auto* t_epochs = train_cmd->add_option("--epochs", tr_epochs, "epochs");
    auto* t_steps = train_cmd->add_option("--max-steps", tr_steps, "stop after N steps (0 = epochs)");
    auto* t_lr = train_cmd->add_option("--lr", tr_lr, "learning rate");
    auto* t_b1 = train_cmd->add_option("--beta1", tr_b1, "Adam beta1");
    auto* t_b2 = train_cmd->add_option("--beta2", tr_b2, "Adam beta2");
    auto* t_seed = train_cmd->add_option("--seed", tr_seed, "training seed");
    auto* t_ckpt = train_cmd->add_option("--checkpoint-every", tr_ckpt, "checkpoint cadence in steps");
    auto* t_noaug = train_cmd->add_flag("--no-augment", tr_no_aug, "disable augmentation");
    train_cmd->add_flag("--deterministic,!--no-deterministic", tr_det,
                        "deterministic mode (always on; kept for interface stability)");
    auto* t_ch = train_cmd->add_option("--channels", tr_channels, "model channels");
    auto* t_ly = train_cmd->add_option("--vfe-layers", tr_layers, "VFE layer count");
    auto* t_hd = train_cmd->add_option("--heads", tr_heads, "attention heads");
    auto* t_ff = train_cmd->add_option("--ffn-hidden", tr_ffn, "FFN hidden units");
    auto* t_rs = train_cmd->add_option("--residual-scale", tr_beta, "residual scale");

    // ---- infer ----
    auto* infer_cmd = app.add_subcommand("infer", "predict vascular signal from a structural volume");
    std::string in_ckpt, in_volume, in_out;
    long long in_patch = 0, in_z0 = 0, in_z1 = 0, in_depth = 8;
    infer_cmd->add_option("--config", config_path, "TOML config file");
    infer_cmd->add_option("--checkpoint", in_ckpt, "trained model checkpoint")->required();
    infer_cmd->add_option("--volume", in_volume, "structural volume (repeat 0 is used)")->required();
    infer_cmd->add_option("--out", in_out, "output directory")->required();
    infer_cmd->add_option("--patch", in_patch, "tile size override (default: training patch)");
    infer_cmd->add_option("--mip-z0", in_z0, "enface depth range start");
    infer_cmd->add_option("--mip-z1", in_z1, "enface depth range end (default: full depth)");
    infer_cmd->add_option("--png-depth", in_depth, "enface PNG bit depth (8 or 16)");

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "metric reports against the all-repeat targets");
    std::string ev_manifest, ev_ckpt, ev_pred, ev_out = "eval.json";
    eval_cmd->add_option("--config", config_path, "TOML config file");
    eval_cmd->add_option("--manifest", ev_manifest, "dataset manifest")->required();
    eval_cmd->add_option("--checkpoint", ev_ckpt, "trained model checkpoint");
    eval_cmd->add_option("--predictions", ev_pred, "directory of precomputed prediction patches");
    eval_cmd->add_option("--out", ev_out, "output JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    if (!config_path.empty()) ctx.cfg = ConfigFile::parse_file(config_path);

    if (gen->parsed()) {
        PhantomConfig pc = phantom_config_from(ctx, go, gi, gd);
        fs::create_directories(gen_out);
        for (long long i = 0; i < gen_count; ++i) {
            PhantomConfig c = pc;
            c.seed = pc.seed + static_cast<std::uint64_t>(i);
            const Phantom ph = make_phantom(c);
            const std::string stem = "phantom_" + zero_pad(static_cast<std::size_t>(i), 3);
            save_volume(ph.volume, (fs::path(gen_out) / (stem + ".octv")).string());
            MultiRepeatVolume mask(1, c.ny, c.nx, c.nz);
            for (std::size_t j = 0; j < ph.vessel_mask.size(); ++j)
                mask.data[j] = static_cast<float>(ph.vessel_mask[j]);
            save_volume(mask, (fs::path(gen_out) / (stem + "_mask.octv")).string());
            std::string meta = "{\n";
            for (auto it = ph.volume.meta.begin(); it != ph.volume.meta.end(); ++it)
                meta += "  \"" + it->first + "\": \"" + it->second + "\"" +
                        (std::next(it) == ph.volume.meta.end() ? "\n" : ",\n");
            meta += "}\n";
            write_file((fs::path(gen_out) / (stem + ".json")).string(), meta);
            std::cout << "wrote " << stem << ".octv (" << c.nr << "x" << c.ny << "x" << c.nx << "x"
                      << c.nz << ")\n";
        }
        return 0;
    }

    if (build->parsed()) {
        pipeline::DatasetOptions d;
        d.patch = static_cast<std::size_t>(ctx.geti(o_patch, ds_patch, "dataset.patch", 192));
        d.val_volumes = static_cast<std::size_t>(ctx.geti(o_val, ds_val, "dataset.val_volumes", 1));
        d.ed_k = static_cast<std::size_t>(ctx.geti(o_k, ds_k, "dataset.ed_k", 1));
        d.baseline_repeats =
            static_cast<std::size_t>(ctx.geti(o_base, ds_baseline, "dataset.baseline_repeats", 4));
        d.lo_pct = ctx.getd(o_lo, ds_lo, "dataset.lo_pct", 0.0);
        d.hi_pct = ctx.getd(o_hi, ds_hi, "dataset.hi_pct", 99.9);
        d.seed = static_cast<std::uint64_t>(ctx.geti(o_seed, ds_seed, "dataset.seed", 1));

        std::vector<std::string> volumes = ds_volumes;
        const long long n_gen = ctx.geti(o_gen, ds_gen, "dataset.gen_phantoms", 0);
        if (n_gen > 0) {
            PhantomConfig pc = phantom_config_from(ctx, bgo, bgi, bgd);
            const fs::path vol_dir = fs::path(ds_out) / "volumes";
            fs::create_directories(vol_dir);
            for (long long i = 0; i < n_gen; ++i) {
                PhantomConfig c = pc;
                c.seed = pc.seed + static_cast<std::uint64_t>(i);
                const Phantom ph = make_phantom(c);
                const std::string p =
                    (vol_dir / ("phantom_" + zero_pad(static_cast<std::size_t>(i), 3) + ".octv"))
                        .string();
                save_volume(ph.volume, p);
                volumes.push_back(p);
            }
        }
        if (volumes.empty()) throw ArgumentError("dataset build: no volumes given or generated");
        const pipeline::Manifest m = pipeline::build_dataset(volumes, ds_out, d);
        std::cout << "dataset: " << m.records.size() << " records ("
                  << m.split("train").size() << " train, " << m.split("val").size() << " val)\n";
        return 0;
    }

    if (octa->parsed()) {
        const std::string algo = ctx.gets(o_algo, oc_algo, "octa.algo", "ed");
        if (algo != "sv" && algo != "ed") throw ArgumentError("octa: algo must be sv or ed");
        const MultiRepeatVolume vol = load_volume(oc_volume);
        const long long reps = ctx.geti(o_rep, oc_repeats, "octa.repeats", 0);
        const std::size_t repeats = reps == 0 ? vol.nr : static_cast<std::size_t>(reps);
        if (repeats > vol.nr) throw ArgumentError("octa: repeats exceed volume repeat count");
        const std::size_t k = static_cast<std::size_t>(ctx.geti(o_ock, oc_kk, "octa.k", 1));
        const MultiRepeatVolume flow = pipeline::classical_flow_volume(
            vol, algo == "sv" ? pipeline::Algo::sv : pipeline::Algo::ed, repeats, k);
        fs::create_directories(oc_out);
        save_volume(flow, (fs::path(oc_out) / ("flow_" + algo + ".octv")).string());
        const std::size_t z1 = oc_z1 > 0 ? static_cast<std::size_t>(oc_z1) : flow.nz;
        const EnfaceImage enface = mip_enface(flow, static_cast<std::size_t>(oc_z0), z1);
        export_png(enface, (fs::path(oc_out) / ("enface_" + algo + ".png")).string(),
                   static_cast<int>(oc_depth));
        std::cout << "wrote flow_" << algo << ".octv and enface_" << algo << ".png\n";
        return 0;
    }

    if (train_cmd->parsed()) {
        pipeline::TrainOptions t;
        t.batch = static_cast<std::size_t>(ctx.geti(t_batch, tr_batch, "train.batch", 4));
        t.epochs = static_cast<std::size_t>(ctx.geti(t_epochs, tr_epochs, "train.epochs", 200));
        t.max_steps = static_cast<std::size_t>(ctx.geti(t_steps, tr_steps, "train.max_steps", 0));
        t.adam.lr = ctx.getd(t_lr, tr_lr, "train.lr", 1e-4);
        t.adam.beta1 = ctx.getd(t_b1, tr_b1, "train.beta1", 0.8);
        t.adam.beta2 = ctx.getd(t_b2, tr_b2, "train.beta2", 0.999);
        t.seed = static_cast<std::uint64_t>(ctx.geti(t_seed, tr_seed, "train.seed", 1));
        t.checkpoint_every =
            static_cast<std::size_t>(ctx.geti(t_ckpt, tr_ckpt, "train.checkpoint_every", 0));
        t.augment = !(t_noaug->count() ? tr_no_aug : !ctx.getb(t_noaug, true, "train.augment", true));
        t.deterministic = tr_det;
        t.model.channels = static_cast<std::size_t>(ctx.geti(t_ch, tr_channels, "model.channels", 64));
        t.model.vfe_layers =
            static_cast<std::size_t>(ctx.geti(t_ly, tr_layers, "model.vfe_layers", 4));
        t.model.heads = static_cast<std::size_t>(ctx.geti(t_hd, tr_heads, "model.heads", 4));
        t.model.ffn_hidden = static_cast<std::size_t>(ctx.geti(t_ff, tr_ffn, "model.ffn_hidden", 256));
        t.model.residual_scale = ctx.getd(t_rs, tr_beta, "model.residual_scale", 0.4);
        t.out_dir = tr_out;

        const pipeline::Manifest m = pipeline::load_manifest(tr_manifest);
        const std::string manifest_dir = fs::path(tr_manifest).parent_path().string();
        const pipeline::TrainResult r = pipeline::train(m, manifest_dir, t);
        std::cout << "trained " << r.steps << " steps, loss " << r.initial_loss << " -> "
                  << r.final_loss << "\ncheckpoint: " << r.checkpoint_path << "\n";
        return 0;
    }

    if (infer_cmd->parsed()) {
        pipeline::LoadedModel lm = pipeline::load_model(in_ckpt);
        const std::size_t patch = in_patch > 0 ? static_cast<std::size_t>(in_patch) : lm.patch;
        const MultiRepeatVolume vol = load_volume(in_volume);
        const MultiRepeatVolume pred = pipeline::infer_volume(*lm.model, vol, patch);
        fs::create_directories(in_out);
        save_volume(pred, (fs::path(in_out) / "pred.octv").string());
        const std::size_t z1 = in_z1 > 0 ? static_cast<std::size_t>(in_z1) : pred.nz;
        export_png(mip_enface(pred, static_cast<std::size_t>(in_z0), z1),
                   (fs::path(in_out) / "enface_pred.png").string(), static_cast<int>(in_depth));
        std::cout << "wrote pred.octv and enface_pred.png\n";
        return 0;
    }

    if (eval_cmd->parsed()) {
        pipeline::EvalOptions e;
        e.checkpoint = ev_ckpt;
        e.predictions_dir = ev_pred;
        const pipeline::Manifest m = pipeline::load_manifest(ev_manifest);
        const std::string manifest_dir = fs::path(ev_manifest).parent_path().string();
        const auto reports = pipeline::evaluate(m, manifest_dir, e);
        const std::string out = pipeline::evaluation_json(reports);
        write_file(ev_out, out);
        for (const auto& [name, rep] : reports)
            std::cout << name << ": psnr " << rep.psnr.mean << " ssim " << rep.ssim.mean
                      << " ms_ssim " << rep.ms_ssim.mean << "\n";
        std::cout << "wrote " << ev_out << "\n";
        return 0;
    }

    std::cerr << "error: no subcommand selected\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
