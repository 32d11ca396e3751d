#ifndef VET_PIPELINE_HPP
#define VET_PIPELINE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vet/classical.hpp"
#include "vet/metrics.hpp"
#include "vet/model.hpp"
#include "vet/preprocess.hpp"
#include "vet/volume.hpp"

namespace vet::pipeline {

enum class Algo { sv, ed };

// Fig-style preprocessing for one ensemble: frame-to-frame registration
// followed by per-A-line alignment.
BFrameEnsemble preprocess_ensemble(const BFrameEnsemble& raw);

// Classical flow on the first `repeats` frames of an aligned ensemble.
FlowFrame apply_classical(const BFrameEnsemble& aligned, Algo algo, std::size_t repeats,
                          std::size_t k = 1);

// Per-B-frame classical flow over a whole volume (preprocess + algorithm);
// the result is a single-repeat volume of flow frames.
MultiRepeatVolume classical_flow_volume(const MultiRepeatVolume& vol, Algo algo,
                                        std::size_t repeats, std::size_t k = 1);

struct SampleRecord {
    std::string volume_id;
    std::size_t y_index = 0;
    PatchBox box;
    std::string input_path;   // relative to the manifest directory
    std::string target_path;
    std::string sv4_path;
    std::string ed4_path;
    std::string split;        // "train" or "val"
};

struct Manifest {
    std::vector<SampleRecord> records;
    std::uint64_t seed = 0;
    std::size_t patch = 192;

    std::vector<const SampleRecord*> split(const std::string& name) const;
};

void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

struct DatasetOptions {
    std::size_t patch = 192;
    std::size_t val_volumes = 1;      // volumes assigned to the validation split
    std::size_t baseline_repeats = 4;
    std::size_t ed_k = 1;
    double lo_pct = 0.0;
    double hi_pct = 99.9;
    std::uint64_t seed = 1;
};

// Builds input / target / baseline patches for every B-frame of every volume
// and writes them plus manifest.json under out_dir. Split assignment is by
// source volume (sorted ids, last val_volumes go to validation).
Manifest build_dataset(const std::vector<std::string>& volume_paths, const std::string& out_dir,
                       const DatasetOptions& opt);

struct TrainOptions {
    VetConfig model;
    nn::AdamConfig adam;
    std::size_t batch = 4;
    std::size_t epochs = 200;
    std::size_t max_steps = 0;  // when nonzero, stops after this many steps
    bool augment = true;
    bool deterministic = true;
    std::uint64_t seed = 1;
    std::size_t checkpoint_every = 0;  // steps; 0 = final checkpoint only
    std::string out_dir;
};

struct TrainResult {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::size_t steps = 0;
    std::string checkpoint_path;
    std::string loss_log;                   // full tab-separated log text
    std::vector<std::size_t> visits_per_epoch;
};

TrainResult train(const Manifest& manifest, const std::string& manifest_dir,
                  const TrainOptions& opt);

// Checkpoint I/O with the model configuration stored in a JSON sidecar
// (<path>.json) so inference can rebuild the network.
void save_model(const VetModel<float>& model, std::size_t patch, const std::string& path);
struct LoadedModel {
    VetConfig config;
    std::size_t patch = 0;
    std::unique_ptr<VetModel<float>> model;
};
LoadedModel load_model(const std::string& path);

// Tiled single-frame inference: normalized patches through the network,
// overlaps averaged, output clamped to [0,1].
Image2D infer_frame(const VetModel<float>& model, const Image2D& normalized_frame,
                    std::size_t patch);

// Whole-volume inference on repeat 0; returns a single-repeat flow volume.
MultiRepeatVolume infer_volume(const VetModel<float>& model, const MultiRepeatVolume& vol,
                               std::size_t patch, double lo_pct = 0.0, double hi_pct = 99.9);

struct EvalOptions {
    std::string checkpoint;        // one of checkpoint / predictions_dir
    std::string predictions_dir;   // patch files named like the input patches
};

// Metric reports for {input, sv4, ed4, vet} against the all-repeat targets of
// the validation split.
std::map<std::string, MetricReport> evaluate(const Manifest& manifest,
                                             const std::string& manifest_dir,
                                             const EvalOptions& opt);

std::string evaluation_json(const std::map<std::string, MetricReport>& reports);

Image2D load_patch(const std::string& path);
void save_patch(const Image2D& img, const std::string& path);

}  // namespace vet::pipeline

#endif
