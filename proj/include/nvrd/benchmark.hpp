#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nvrd/errors.hpp"
#include "nvrd/rng.hpp"
#include "nvrd/subject.hpp"
#include "nvrd/tensor.hpp"
#include "nvrd/video.hpp"

namespace nvrd::sim {

// All knobs of a generated dataset. Defaults give the desk-scale benchmark:
// 18 paired training segments of 48 s plus one 96 s held-out segment with
// dense repeats, at 8 Hz and a 2 s repetition time.
struct BenchmarkConfig {
    std::uint64_t seed = 7;
    std::size_t n_train_segments = 18;
    double train_segment_seconds = 48.0;
    double test_segment_seconds = 96.0;
    std::size_t train_repeats = 2;
    std::size_t test_repeats = 10;
    std::size_t n_voxels = 256;
    double tr_seconds = 2.0;
    double frame_rate_hz = 8.0;
    std::size_t frame_height = 32;
    std::size_t frame_width = 32;
    std::size_t delay_trs = 2;
    double noise_sigma = 0.6;

    void validate() const {
        require_config(n_train_segments >= 1, "benchmark: need at least one training segment");
        require_config(train_segment_seconds > 0.0 && test_segment_seconds > 0.0,
                "benchmark: segment durations must be positive");
        require_config(train_repeats >= 1 && test_repeats >= 1, "benchmark: need at least one repeat");
        require_config(n_voxels >= 1, "benchmark: need at least one voxel");
        require_config(tr_seconds > 0.0 && frame_rate_hz > 0.0, "benchmark: bad timing");
        require_config(frame_height >= 8 && frame_width >= 8, "benchmark: frames too small");
        require_config(noise_sigma >= 0.0, "benchmark: negative noise sigma");
    }
};

inline void to_json(nlohmann::json& j, const BenchmarkConfig& c) {
    j = nlohmann::json{{"seed", c.seed},
                       {"n_train_segments", c.n_train_segments},
                       {"train_segment_seconds", c.train_segment_seconds},
                       {"test_segment_seconds", c.test_segment_seconds},
                       {"train_repeats", c.train_repeats},
                       {"test_repeats", c.test_repeats},
                       {"n_voxels", c.n_voxels},
                       {"tr_seconds", c.tr_seconds},
                       {"frame_rate_hz", c.frame_rate_hz},
                       {"frame_height", c.frame_height},
                       {"frame_width", c.frame_width},
                       {"delay_trs", c.delay_trs},
                       {"noise_sigma", c.noise_sigma}};
}

inline void from_json(const nlohmann::json& j, BenchmarkConfig& c) {
    BenchmarkConfig d;
    c.seed = j.value("seed", d.seed);
    c.n_train_segments = j.value("n_train_segments", d.n_train_segments);
    c.train_segment_seconds = j.value("train_segment_seconds", d.train_segment_seconds);
    c.test_segment_seconds = j.value("test_segment_seconds", d.test_segment_seconds);
    c.train_repeats = j.value("train_repeats", d.train_repeats);
    c.test_repeats = j.value("test_repeats", d.test_repeats);
    c.n_voxels = j.value("n_voxels", d.n_voxels);
    c.tr_seconds = j.value("tr_seconds", d.tr_seconds);
    c.frame_rate_hz = j.value("frame_rate_hz", d.frame_rate_hz);
    c.frame_height = j.value("frame_height", d.frame_height);
    c.frame_width = j.value("frame_width", d.frame_width);
    c.delay_trs = j.value("delay_trs", d.delay_trs);
    c.noise_sigma = j.value("noise_sigma", d.noise_sigma);
}

struct SegmentRecord {
    std::string id;
    double seconds = 0.0;
    std::string video_path;               // relative to the dataset root
    std::vector<std::string> fmri_paths;  // one per repeat
    std::vector<std::uint64_t> noise_seeds;
};

struct BenchmarkDataset {
    std::filesystem::path root;
    BenchmarkConfig config;
    std::vector<SegmentRecord> train;
    SegmentRecord test;

    VideoClip load_video(const SegmentRecord& seg) const {
        VideoClip clip;
        clip.frames = read_blob(root / seg.video_path);
        clip.frame_rate_hz = config.frame_rate_hz;
        clip.origin_tag = "internal";
        clip.validate();
        return clip;
    }

    FmriSeries load_fmri(const SegmentRecord& seg, std::size_t repeat) const {
        require_shape(repeat < seg.fmri_paths.size(), "load_fmri: repeat out of range");
        FmriSeries series;
        series.samples = read_blob(root / seg.fmri_paths[repeat]);
        series.tr_seconds = config.tr_seconds;
        series.repeat_index = repeat;
        series.noise_seed = seg.noise_seeds[repeat];
        return series;
    }
};

namespace detail {

inline std::string two_digits(std::size_t i) {
    std::string s = std::to_string(i);
    return s.size() < 2 ? "0" + s : s;
}

inline SegmentRecord write_segment(const BenchmarkConfig& cfg, const VirtualSubject& subject,
                                   const std::filesystem::path& root, const std::string& rel_dir,
                                   const std::string& id, double seconds, std::size_t repeats,
                                   std::uint64_t scene_seed, std::uint64_t noise_salt) {
    namespace fs = std::filesystem;
    fs::create_directories(root / rel_dir);
    SceneSpec spec;
    spec.height = cfg.frame_height;
    spec.width = cfg.frame_width;
    spec.frame_rate_hz = cfg.frame_rate_hz;
    VideoClip clip = generate_video(spec, seconds, scene_seed);

    SegmentRecord rec;
    rec.id = id;
    rec.seconds = seconds;
    rec.video_path = rel_dir + "/video.nvrd";
    write_blob(root / rec.video_path, clip.frames);

    std::vector<FmriSeries> reps =
        simulate_repeats(subject, clip, repeats, noise_salt, cfg.tr_seconds);
    for (std::size_t r = 0; r < reps.size(); ++r) {
        std::string rel = rel_dir + "/fmri_rep" + two_digits(r) + ".nvrd";
        write_blob(root / rel, reps[r].samples);
        rec.fmri_paths.push_back(rel);
        rec.noise_seeds.push_back(reps[r].noise_seed);
    }
    return rec;
}

inline nlohmann::json segment_to_json(const SegmentRecord& rec) {
    return nlohmann::json{{"id", rec.id},
                          {"seconds", rec.seconds},
                          {"video", rec.video_path},
                          {"fmri", rec.fmri_paths},
                          {"noise_seeds", rec.noise_seeds}};
}

inline SegmentRecord segment_from_json(const nlohmann::json& j) {
    SegmentRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.seconds = j.at("seconds").get<double>();
    rec.video_path = j.at("video").get<std::string>();
    rec.fmri_paths = j.at("fmri").get<std::vector<std::string>>();
    rec.noise_seeds = j.at("noise_seeds").get<std::vector<std::uint64_t>>();
    return rec;
}

}  // namespace detail

inline VirtualSubject benchmark_subject(const BenchmarkConfig& cfg) {
    return make_virtual_subject(cfg.n_voxels, mix_seed(cfg.seed, 0x7375626au), cfg.noise_sigma,
                                cfg.delay_trs, cfg.tr_seconds);
}

// Generate the full dataset under out_dir: one video blob plus one fMRI blob
// per repeat for every segment, the subject readout, and manifest.json tying
// it together. Everything is a pure function of the config, so the same
// config yields byte-identical files.
inline BenchmarkDataset make_benchmark(const BenchmarkConfig& cfg,
                                       const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    cfg.validate();
    fs::create_directories(out_dir);

    BenchmarkDataset ds;
    ds.root = out_dir;
    ds.config = cfg;

    VirtualSubject subject = benchmark_subject(cfg);
    write_blob(out_dir / "subject_readout.nvrd", subject.readout_weights);

    for (std::size_t i = 0; i < cfg.n_train_segments; ++i) {
        std::string id = "train" + detail::two_digits(i);
        ds.train.push_back(detail::write_segment(
            cfg, subject, out_dir, "train/seg_" + detail::two_digits(i), id,
            cfg.train_segment_seconds, cfg.train_repeats,
            mix_seed(cfg.seed, 0x7363656eu, static_cast<std::uint64_t>(i)),
            static_cast<std::uint64_t>(i)));
    }
    ds.test = detail::write_segment(cfg, subject, out_dir, "test/seg_00", "test00",
                                    cfg.test_segment_seconds, cfg.test_repeats,
                                    mix_seed(cfg.seed, 0x7363656eu, 0x74657374u), 10000);

    nlohmann::json manifest;
    manifest["format_version"] = 1;
    manifest["config"] = cfg;
    manifest["hrf"] = {{"peak_seconds", subject.hrf.peak_seconds},
                       {"duration_seconds",
                        static_cast<double>(subject.hrf.taps.size() - 1) * subject.hrf.tr_seconds},
                       {"taps", subject.hrf.taps}};
    manifest["subject_readout"] = "subject_readout.nvrd";
    nlohmann::json train_json = nlohmann::json::array();
    for (const auto& rec : ds.train) train_json.push_back(detail::segment_to_json(rec));
    manifest["train_segments"] = train_json;
    manifest["test_segment"] = detail::segment_to_json(ds.test);
    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return ds;
}

inline BenchmarkDataset load_benchmark(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    require_io(in.good(), "load_benchmark: cannot open manifest.json under " + dir.string());
    nlohmann::json manifest = nlohmann::json::parse(in);
    BenchmarkDataset ds;
    ds.root = dir;
    ds.config = manifest.at("config").get<BenchmarkConfig>();
    for (const auto& j : manifest.at("train_segments"))
        ds.train.push_back(detail::segment_from_json(j));
    ds.test = detail::segment_from_json(manifest.at("test_segment"));
    require(!ds.train.empty(), "load_benchmark: manifest lists no training segments");
    return ds;
}

}  // namespace nvrd::sim
