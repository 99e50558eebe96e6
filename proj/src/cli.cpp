#include "deadwood/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "deadwood/losses.hpp"
#include "deadwood/metrics.hpp"
#include "deadwood/postprocess.hpp"
#include "deadwood/render.hpp"
#include "deadwood/splitter.hpp"
#include "deadwood/synth.hpp"

namespace deadwood::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class StageTimer {
  public:
    void start(const std::string& name) {
        name_ = name;
        t0_ = std::chrono::steady_clock::now();
    }
    void stop() {
        const auto dt = std::chrono::steady_clock::now() - t0_;
        timings_[name_] = std::chrono::duration<double, std::milli>(dt).count();
    }
    const std::map<std::string, double>& timings() const { return timings_; }

  private:
    std::string name_;
    std::chrono::steady_clock::time_point t0_;
    std::map<std::string, double> timings_;
};

// Every JSON the tool emits carries the resolved config, input digests and
// stage timings, so a run is reproducible from its outputs alone.
json run_metadata(const json& config, const std::vector<std::string>& inputs,
                  const StageTimer& timer) {
    json meta;
    meta["tool_version"] = kVersion;
    meta["config"] = config;
    json digests;
    for (const std::string& path : inputs) digests[path] = file_digest_hex(path);
    meta["input_digests"] = digests;
    json timings;
    for (const auto& [k, v] : timer.timings()) timings[k] = v;
    meta["timings_ms"] = timings;
    return meta;
}

void write_json_file(const json& doc, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << doc.dump(2) << '\n';
}

void write_sidecar_meta(const std::string& primary_output, const json& config,
                        const std::vector<std::string>& inputs, const StageTimer& timer) {
    json doc;
    doc["metadata"] = run_metadata(config, inputs, timer);
    write_json_file(doc, primary_output + ".meta.json");
}

struct EvalInputs {
    InstanceMap gt;
    std::vector<Point2d> gt_centroids_px;  // indexed by gt label
    bool centroids_from_annotations = false;
};

EvalInputs load_gt(const std::string& path, const InstanceMap& like) {
    EvalInputs out;
    if (path.size() > 8 && path.substr(path.size() - 8) == ".geojson") {
        const std::vector<Annotation> anns = read_annotations(path);
        std::vector<Polygon> polys;
        for (const Annotation& a : anns) polys.push_back(a.polygon);
        out.gt = rasterize_polygons(polys, like.geo, like.height, like.width);
        out.gt_centroids_px.resize(anns.size() + 1);
        for (size_t i = 0; i < anns.size(); ++i) {
            out.gt_centroids_px[i + 1] = like.geo.map_to_pixel(anns[i].centroid.x, anns[i].centroid.y);
        }
        out.centroids_from_annotations = true;
    } else {
        out.gt = read_instance_map(path);
        out.gt_centroids_px = instance_centroids_px(out.gt);
    }
    if (out.gt.width != like.width || out.gt.height != like.height) {
        throw DimensionError("ground truth shape does not match predictions");
    }
    return out;
}

json eval_report_json(const EvalReport& rep) {
    json doc;
    doc["pixel_iou"] = rep.pixel_iou;
    if (rep.tree_iou) {
        doc["tree_iou"] = *rep.tree_iou;
    } else {
        doc["tree_iou"] = nullptr;
    }
    if (rep.centroid_rmse_px) {
        doc["centroid_rmse_px"] = *rep.centroid_rmse_px;
    } else {
        doc["centroid_rmse_px"] = nullptr;
    }
    doc["tp"] = rep.tp;
    doc["fp"] = rep.fp;
    doc["fn"] = rep.fn;
    doc["pooled"] = {{"precision", rep.pooled.precision},
                     {"recall", rep.pooled.recall},
                     {"f1", rep.pooled.f1}};
    doc["macro"] = {{"precision", rep.macro.precision},
                    {"recall", rep.macro.recall},
                    {"f1", rep.macro.f1}};
    doc["iou_threshold"] = rep.iou_threshold;
    json imgs = json::array();
    for (const ImageEval& e : rep.per_image) {
        json j;
        j["name"] = e.name;
        j["pixel_iou"] = e.pixel_iou;
        j["tree_iou"] = e.tree_iou ? json(*e.tree_iou) : json(nullptr);
        j["centroid_rmse_px"] = e.centroid_rmse_px ? json(*e.centroid_rmse_px) : json(nullptr);
        j["tp"] = e.tp;
        j["fp"] = e.fp;
        j["fn"] = e.fn;
        imgs.push_back(std::move(j));
    }
    doc["per_image"] = std::move(imgs);
    return doc;
}

int run_targets(const std::string& annotations_path, const std::string& out_path,
                const std::string& instances_path, int width, int height, double origin_x,
                double origin_y, bool origin_y_set, double pixel_size, double sigma) {
    StageTimer timer;
    timer.start("targets");
    GeoTransform geo;
    geo.pixel_size_x = pixel_size;
    geo.pixel_size_y = pixel_size;
    geo.origin_x = origin_x;
    geo.origin_y = origin_y_set ? origin_y : height * pixel_size;

    const std::vector<Annotation> anns = read_annotations(annotations_path);
    const TargetStack ts = build_target_stack(anns, geo, height, width, sigma);
    write_raster(ts.stack, out_path);
    if (!instances_path.empty()) write_instance_map(ts.instances, instances_path);
    timer.stop();

    json config = {{"width", width},      {"height", height},         {"origin_x", geo.origin_x},
                   {"origin_y", geo.origin_y}, {"pixel_size", pixel_size}, {"sigma", sigma}};
    write_sidecar_meta(out_path, config, {annotations_path}, timer);
    if (ts.dropped_outside > 0) {
        std::cerr << "warning: dropped " << ts.dropped_outside
                  << " annotation(s) entirely outside the raster extent\n";
    }
    std::cout << "wrote " << out_path << " (" << anns.size() << " annotations, "
              << ts.dropped_outside << " dropped)\n";
    return 0;
}

int run_loss_eval(const std::string& pred_path, const std::string& target_path,
                  const std::string& weights_path, const std::string& csv_path) {
    StageTimer timer;
    timer.start("loss_eval");
    const MultiChannelRaster pred = read_raster(pred_path);
    TargetStack target;
    target.stack = read_raster(target_path);
    LossWeights w;
    if (!weights_path.empty()) w = LossWeights::from_json_file(weights_path);
    const LossValue loss = total_loss(pred, target, w);
    timer.stop();

    std::ostringstream csv;
    csv << "component,value\n";
    csv << "bce," << loss.components.bce << "\n";
    csv << "dice," << loss.components.dice << "\n";
    csv << "focal," << loss.components.focal << "\n";
    csv << "centroid," << loss.components.centroid << "\n";
    csv << "sdt," << loss.components.sdt << "\n";
    csv << "boundary," << loss.components.boundary << "\n";
    csv << "total," << loss.total << "\n";
    if (csv_path.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream f(csv_path);
        if (!f) throw IoError("cannot open for writing: " + csv_path);
        f << csv.str();
        json config;
        config["weights_file"] = weights_path;
        write_sidecar_meta(csv_path, config, {pred_path, target_path}, timer);
        std::cout << "wrote " << csv_path << "\n";
    }
    return 0;
}

int run_postprocess(const std::string& pred_path, const std::string& config_path,
                    const std::string& labels_path, const std::string& geojson_path,
                    const std::string& stages, const std::string& vector_mode, int crs_epsg) {
    StageTimer timer;
    timer.start("read");
    const MultiChannelRaster pred = read_raster(pred_path);
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = PipelineConfig::from_json_file(config_path);
    if (!stages.empty()) cfg.stages = PipelineConfig::stages_from_name(stages);
    timer.stop();

    timer.start("pipeline");
    const VectorizeMode mode =
        vector_mode == "ellipse" ? VectorizeMode::Ellipse : VectorizeMode::Contour;
    const PipelineResult res = run_pipeline(pred, cfg, mode);
    timer.stop();

    timer.start("write");
    if (!labels_path.empty()) write_instance_map(res.labels, labels_path);
    if (!geojson_path.empty()) write_instances_geojson(res.instances, crs_epsg, geojson_path);
    timer.stop();

    const std::string meta_anchor = !labels_path.empty() ? labels_path : geojson_path;
    std::vector<std::string> inputs = {pred_path};
    if (!config_path.empty()) inputs.push_back(config_path);
    if (!meta_anchor.empty()) {
        write_sidecar_meta(meta_anchor, json::parse(cfg.to_json()), inputs, timer);
    }
    if (res.discarded_markers > 0) {
        std::cerr << "warning: discarded " << res.discarded_markers << " marker(s) outside the mask\n";
    }
    std::cout << res.instances.size() << " instances\n";
    return 0;
}

int run_evaluate(const std::string& pred_path, const std::string& gt_path,
                 const std::string& config_path, const std::string& report_path,
                 const std::string& csv_path) {
    StageTimer timer;
    timer.start("evaluate");
    const InstanceMap pred = read_instance_map(pred_path);

    double iou_threshold = 0.5;
    json config;
    if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) throw IoError("cannot open: " + config_path);
        f >> config;
        iou_threshold = config.value("iou_threshold", 0.5);
    }
    config["iou_threshold"] = iou_threshold;

    const EvalInputs gt = load_gt(gt_path, pred);
    EvalReport rep = evaluate_images({&pred}, {&gt.gt}, iou_threshold, {fs::path(pred_path).filename()});
    // Annotation centroids are authoritative when the ground truth came as
    // polygons.
    if (gt.centroids_from_annotations) {
        const MatchResult match = match_instances(pred, gt.gt, iou_threshold);
        rep.centroid_rmse_px =
            centroid_rmse(match, instance_centroids_px(pred), gt.gt_centroids_px);
        rep.per_image[0].centroid_rmse_px = rep.centroid_rmse_px;
    }
    timer.stop();

    json doc = eval_report_json(rep);
    doc["metadata"] = run_metadata(config, {pred_path, gt_path}, timer);
    write_json_file(doc, report_path);

    if (!csv_path.empty()) {
        std::ofstream f(csv_path);
        if (!f) throw IoError("cannot open for writing: " + csv_path);
        f << "name,pixel_iou,tree_iou,centroid_rmse_px,tp,fp,fn\n";
        for (const ImageEval& e : rep.per_image) {
            f << e.name << "," << e.pixel_iou << ","
              << (e.tree_iou ? std::to_string(*e.tree_iou) : "") << ","
              << (e.centroid_rmse_px ? std::to_string(*e.centroid_rmse_px) : "") << ","
              << e.tp << "," << e.fp << "," << e.fn << "\n";
        }
    }
    std::cout << "wrote " << report_path << "\n";
    return 0;
}

int run_split(const std::string& annotations_path, const std::string& images_path,
              double bin_size, const std::string& ratios_str, uint64_t seed,
              const std::string& out_path, int patch_size, double overlap) {
    StageTimer timer;
    timer.start("split");

    std::array<double, 3> ratios{0.7, 0.2, 0.1};
    {
        std::stringstream ss(ratios_str);
        std::string tok;
        int i = 0;
        while (std::getline(ss, tok, ',') && i < 3) ratios[static_cast<size_t>(i++)] = std::stod(tok);
        if (i != 3) throw ValidationError("--ratios expects three comma-separated numbers");
    }

    const std::vector<Annotation> anns = read_annotations(annotations_path);

    std::ifstream mf(images_path);
    if (!mf) throw IoError("cannot open: " + images_path);
    json manifest;
    mf >> manifest;
    if (!manifest.contains("images")) throw FormatError("images manifest needs an 'images' array");

    struct PatchRef {
        int image = 0;
        int row0 = 0, col0 = 0;
        Point2d center_map;
        int64_t segments = 0;
    };
    std::vector<PatchRef> patches;

    int image_idx = 0;
    for (const auto& entry : manifest["images"]) {
        const std::string img_path = entry.get<std::string>();
        const MultiChannelRaster img = read_raster(img_path);
        const int stride = std::max(1, static_cast<int>(std::lround(patch_size * (1.0 - overlap))));
        const std::vector<int> rows = patch_origins(img.height, patch_size, stride);
        const std::vector<int> cols = patch_origins(img.width, patch_size, stride);
        for (int r0 : rows) {
            for (int c0 : cols) {
                PatchRef p;
                p.image = image_idx;
                p.row0 = r0;
                p.col0 = c0;
                p.center_map = img.geo.pixel_to_map(c0 + (patch_size - 1) / 2.0,
                                                    r0 + (patch_size - 1) / 2.0);
                const Point2d lo = img.geo.pixel_to_map(c0 - 0.5, r0 + patch_size - 0.5);
                const Point2d hi = img.geo.pixel_to_map(c0 + patch_size - 0.5, r0 - 0.5);
                for (const Annotation& a : anns) {
                    if (a.centroid.x >= lo.x && a.centroid.x < hi.x && a.centroid.y >= lo.y &&
                        a.centroid.y < hi.y) {
                        p.segments++;
                    }
                }
                patches.push_back(p);
            }
        }
        ++image_idx;
    }

    std::vector<Point2d> centers;
    std::vector<int64_t> counts;
    for (const PatchRef& p : patches) {
        centers.push_back(p.center_map);
        counts.push_back(p.segments);
    }
    const std::vector<RegionCluster> clusters = bin_and_cluster(centers, bin_size, counts);
    const SplitAssignment assign = assign_partitions(clusters, ratios, seed);
    timer.stop();

    json doc;
    json jc = json::array();
    for (size_t i = 0; i < clusters.size(); ++i) {
        json c;
        c["cluster_id"] = clusters[i].cluster_id;
        c["segment_count"] = clusters[i].segment_count;
        c["partition"] = partition_name(assign.cluster_partition[i]);
        json bins = json::array();
        for (const auto& [bx, by] : clusters[i].bins) bins.push_back({bx, by});
        c["bins"] = bins;
        json members = json::array();
        for (int pidx : clusters[i].members) {
            const PatchRef& p = patches[static_cast<size_t>(pidx)];
            members.push_back({{"image", p.image}, {"row0", p.row0}, {"col0", p.col0},
                               {"segments", p.segments}});
        }
        c["patches"] = members;
        jc.push_back(std::move(c));
    }
    doc["clusters"] = std::move(jc);
    doc["segment_totals"] = {{"train", assign.segment_totals[0]},
                             {"validation", assign.segment_totals[1]},
                             {"test", assign.segment_totals[2]}};
    doc["achieved_fractions"] = {{"train", assign.achieved_fractions[0]},
                                 {"validation", assign.achieved_fractions[1]},
                                 {"test", assign.achieved_fractions[2]}};
    doc["degenerate"] = assign.degenerate;
    json config = {{"bin_size", bin_size},
                   {"ratios", {ratios[0], ratios[1], ratios[2]}},
                   {"seed", seed},
                   {"patch_size", patch_size},
                   {"overlap", overlap}};
    doc["metadata"] = run_metadata(config, {annotations_path, images_path}, timer);
    write_json_file(doc, out_path);
    if (assign.degenerate) {
        std::cerr << "warning: fewer than 3 clusters; assignment is best-effort\n";
    }
    std::cout << "wrote " << out_path << " (" << clusters.size() << " clusters)\n";
    return 0;
}

int run_synth(const std::string& spec_path, const std::string& out_dir, int count) {
    StageTimer timer;
    timer.start("synth");
    const SceneSpec base = SceneSpec::from_json_file(spec_path);
    std::vector<SceneSpec> specs;
    for (int i = 0; i < std::max(1, count); ++i) {
        SceneSpec s = base;
        s.seed = base.seed + static_cast<uint64_t>(i);
        specs.push_back(s);
    }
    const std::string manifest = write_corpus(specs, out_dir);
    timer.stop();

    // The corpus manifest already carries the per-scene specs; the sidecar
    // adds digests and timing.
    write_sidecar_meta(manifest, json::parse(base.to_json()), {spec_path}, timer);
    std::cout << "wrote " << manifest << " (" << specs.size() << " scenes)\n";
    return 0;
}

int run_render(const std::string& labels_path, const std::string& base_path,
               const std::string& out_path) {
    const InstanceMap labels = read_instance_map(labels_path);
    if (base_path.empty()) {
        render_labels(labels, nullptr, out_path);
    } else {
        const MultiChannelRaster base = read_raster(base_path);
        const FloatGrid gray = base.extract_channel(0);
        render_labels(labels, &gray, out_path);
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int run_ablate(const std::string& corpus_path, const std::string& config_path,
               double iou_threshold, const std::string& out_csv) {
    StageTimer timer;
    timer.start("ablate");
    const std::vector<CorpusEntry> entries = read_corpus_manifest(corpus_path);
    if (entries.empty()) throw ValidationError("corpus manifest lists no scenes");

    PipelineConfig base_cfg;
    if (!config_path.empty()) base_cfg = PipelineConfig::from_json_file(config_path);

    const std::vector<std::string> presets = {"raw", "filter", "watershed", "final"};
    std::ostringstream csv;
    csv << "config,pixel_iou,tree_iou,centroid_rmse_px,precision,recall,f1\n";

    for (const std::string& preset : presets) {
        PipelineConfig cfg = base_cfg;
        cfg.stages = PipelineConfig::stages_from_name(preset);

        int64_t inter_px = 0, union_px = 0;
        double iou_sum = 0.0;
        int64_t gt_total = 0;
        double sq_sum = 0.0;
        int64_t matched = 0;
        int tp = 0, fp = 0, fn = 0;

        for (const CorpusEntry& e : entries) {
            const MultiChannelRaster pred = read_raster((fs::path(e.dir) / "pred.rast").string());
            const InstanceMap gt = read_instance_map((fs::path(e.dir) / "instances.rast").string());
            const PipelineResult res = run_pipeline(pred, cfg);

            const MatchResult match = match_instances(res.labels, gt, iou_threshold);
            for (size_t i = 0; i < gt.labels.size(); ++i) {
                const bool p = res.labels.labels[i] > 0, g = gt.labels[i] > 0;
                inter_px += (p && g) ? 1 : 0;
                union_px += (p || g) ? 1 : 0;
            }
            const std::vector<int64_t> areas = label_areas(gt);
            for (size_t k = 1; k < areas.size(); ++k) {
                if (areas[k] > 0) ++gt_total;
            }
            for (const MatchPair& pr : match.pairs) iou_sum += pr.iou;
            const std::vector<Point2d> pc = instance_centroids_px(res.labels);
            const std::vector<Point2d> gc = instance_centroids_px(gt);
            for (const MatchPair& pr : match.pairs) {
                const double dx = pc[static_cast<size_t>(pr.pred_id)].x - gc[static_cast<size_t>(pr.gt_id)].x;
                const double dy = pc[static_cast<size_t>(pr.pred_id)].y - gc[static_cast<size_t>(pr.gt_id)].y;
                sq_sum += dx * dx + dy * dy;
            }
            matched += static_cast<int64_t>(match.pairs.size());
            tp += static_cast<int>(match.pairs.size());
            fp += static_cast<int>(match.unmatched_pred.size());
            fn += static_cast<int>(match.unmatched_gt.size());
        }

        const double px_iou = union_px == 0 ? 1.0 : static_cast<double>(inter_px) / union_px;
        const double t_iou = gt_total == 0 ? 0.0 : iou_sum / static_cast<double>(gt_total);
        const double rmse = matched == 0 ? 0.0 : std::sqrt(sq_sum / static_cast<double>(matched));
        const Prf prf = instance_prf(tp, fp, fn);
        csv << preset << "," << px_iou << "," << t_iou << "," << rmse << "," << prf.precision
            << "," << prf.recall << "," << prf.f1 << "\n";
    }
    timer.stop();

    if (out_csv.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream f(out_csv);
        if (!f) throw IoError("cannot open for writing: " + out_csv);
        f << csv.str();
        json config = json::parse(base_cfg.to_json());
        config["iou_threshold"] = iou_threshold;
        write_sidecar_meta(out_csv, config, {corpus_path}, timer);
        std::cout << "wrote " << out_csv << "\n";
    }
    return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"dead-tree instance segmentation toolkit"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "cap worker threads (default: DEADWOOD_THREADS or all)");

    // targets
    auto* c_targets = app.add_subcommand("targets", "build ground-truth target stack from annotations");
    std::string t_ann, t_out, t_instances;
    int t_w = 256, t_h = 256;
    double t_ox = 0.0, t_oy = 0.0, t_ps = 0.25, t_sigma = 3.0;
    bool t_oy_set = false;
    c_targets->add_option("--annotations", t_ann, "GeoJSON annotations")->required();
    c_targets->add_option("--out", t_out, "output raster")->required();
    c_targets->add_option("--out-instances", t_instances, "optional instance map raster");
    c_targets->add_option("--width", t_w)->required();
    c_targets->add_option("--height", t_h)->required();
    c_targets->add_option("--origin-x", t_ox);
    auto* oy_opt = c_targets->add_option("--origin-y", t_oy);
    c_targets->add_option("--pixel-size", t_ps);
    c_targets->add_option("--sigma", t_sigma, "heatmap kernel sigma in pixels");

    // loss-eval
    auto* c_loss = app.add_subcommand("loss-eval", "evaluate the multi-task loss on a prediction stack");
    std::string l_pred, l_target, l_weights, l_csv;
    c_loss->add_option("--pred", l_pred, "3-channel prediction raster (logits, centroid, hybrid)")->required();
    c_loss->add_option("--target", l_target, "3-channel target raster")->required();
    c_loss->add_option("--weights", l_weights, "loss weights JSON");
    c_loss->add_option("--csv", l_csv, "write component table here instead of stdout");

    // postprocess
    auto* c_post = app.add_subcommand("postprocess", "fuse a prediction stack into tree instances");
    std::string p_pred, p_cfg, p_labels, p_geojson, p_stages, p_vec = "contour";
    int p_epsg = 0;
    c_post->add_option("--pred", p_pred, "3-channel prediction raster")->required();
    c_post->add_option("--config", p_cfg, "pipeline config JSON");
    c_post->add_option("--out-labels", p_labels, "output instance map raster");
    c_post->add_option("--out-geojson", p_geojson, "output instance polygons");
    c_post->add_option("--stages", p_stages, "raw|filter|watershed|final");
    c_post->add_option("--vector-mode", p_vec, "contour|ellipse")
        ->check(CLI::IsMember({"contour", "ellipse"}));
    c_post->add_option("--crs-epsg", p_epsg, "EPSG code stamped on GeoJSON output");

    // evaluate
    auto* c_eval = app.add_subcommand("evaluate", "score predicted instances against ground truth");
    std::string e_pred, e_gt, e_cfg, e_report, e_csv;
    c_eval->add_option("--pred-labels", e_pred, "predicted instance map raster")->required();
    c_eval->add_option("--gt", e_gt, "ground truth (GeoJSON or instance map raster)")->required();
    c_eval->add_option("--config", e_cfg, "evaluation config JSON (iou_threshold)");
    c_eval->add_option("--report", e_report, "output report JSON")->required();
    c_eval->add_option("--csv", e_csv, "optional per-image CSV");

    // split
    auto* c_split = app.add_subcommand("split", "spatially stratified train/validation/test split");
    std::string s_ann, s_images, s_ratios = "0.7,0.2,0.1", s_out;
    double s_bin = 1000.0, s_overlap = 0.5;
    uint64_t s_seed = 0;
    int s_patch = 256;
    c_split->add_option("--annotations", s_ann, "GeoJSON annotations")->required();
    c_split->add_option("--images", s_images, "JSON manifest with an 'images' array")->required();
    c_split->add_option("--bin-size", s_bin, "bin size in map units");
    c_split->add_option("--ratios", s_ratios, "train,validation,test fractions");
    c_split->add_option("--seed", s_seed);
    c_split->add_option("--out", s_out, "output split JSON")->required();
    c_split->add_option("--patch-size", s_patch);
    c_split->add_option("--overlap", s_overlap);

    // synth
    auto* c_synth = app.add_subcommand("synth", "generate a synthetic scene corpus");
    std::string y_spec, y_out;
    int y_count = 1;
    c_synth->add_option("--spec", y_spec, "scene spec JSON")->required();
    c_synth->add_option("--out-dir", y_out, "corpus output directory")->required();
    c_synth->add_option("--count", y_count, "number of scenes (seeds seed..seed+count-1)");

    // render
    auto* c_render = app.add_subcommand("render", "render an instance map to PNG");
    std::string r_labels, r_base, r_out;
    c_render->add_option("--labels", r_labels, "instance map raster")->required();
    c_render->add_option("--base", r_base, "optional grayscale base raster");
    c_render->add_option("--out", r_out, "output PNG")->required();

    // ablate
    auto* c_ablate = app.add_subcommand("ablate", "run the four pipeline configurations over a corpus");
    std::string a_corpus, a_cfg, a_csv;
    double a_iou = 0.5;
    c_ablate->add_option("--corpus", a_corpus, "corpus manifest JSON")->required();
    c_ablate->add_option("--config", a_cfg, "pipeline config JSON");
    c_ablate->add_option("--iou-threshold", a_iou);
    c_ablate->add_option("--out", a_csv, "write the table here instead of stdout");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 64;
    }

#ifdef _OPENMP
    if (threads <= 0) {
        if (const char* env = std::getenv("DEADWOOD_THREADS")) {
            threads = std::atoi(env);
        }
    }
    if (threads > 0) omp_set_num_threads(threads);
#endif

    try {
        if (c_targets->parsed()) {
            t_oy_set = oy_opt->count() > 0;
            return run_targets(t_ann, t_out, t_instances, t_w, t_h, t_ox, t_oy, t_oy_set, t_ps, t_sigma);
        }
        if (c_loss->parsed()) return run_loss_eval(l_pred, l_target, l_weights, l_csv);
        if (c_post->parsed()) {
            return run_postprocess(p_pred, p_cfg, p_labels, p_geojson, p_stages, p_vec, p_epsg);
        }
        if (c_eval->parsed()) return run_evaluate(e_pred, e_gt, e_cfg, e_report, e_csv);
        if (c_split->parsed()) {
            return run_split(s_ann, s_images, s_bin, s_ratios, s_seed, s_out, s_patch, s_overlap);
        }
        if (c_synth->parsed()) return run_synth(y_spec, y_out, y_count);
        if (c_render->parsed()) return run_render(r_labels, r_base, r_out);
        if (c_ablate->parsed()) return run_ablate(a_corpus, a_cfg, a_iou, a_csv);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 64;
}

int dispatch(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.push_back(argv[i]);
    return dispatch(args);
}

}  // namespace deadwood::cli
