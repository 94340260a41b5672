// floorline: command-line front end.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 every house failed.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "floorline/batch.hpp"
#include "floorline/config.hpp"
#include "floorline/depth_codec.hpp"
#include "floorline/ingestion.hpp"
#include "floorline/synth.hpp"

namespace fs = std::filesystem;
using namespace floorline;

namespace {

constexpr int kUsage = 1;
constexpr int kDataError = 2;
constexpr int kAllFailed = 3;

nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_text(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, p.string() + ": " + e.what());
  }
}

int cmd_decode(const std::string& path, const std::string& sidecar, const std::string& reencode) {
  auto text = read_text(path);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
  const auto map = decode_depthmap(text);
  std::printf("planes=%zu %dx%d\n", map.plane_count(), map.height, map.width);
  if (!sidecar.empty()) write_text(sidecar, depthmap_sidecar(map).dump(2) + "\n");
  if (!reencode.empty()) write_text(reencode, encode_depthmap(map) + "\n");
  return 0;
}

struct EstimateFlags {
  std::string config, houses, bundles, output, sampling, final_subset, min_date;
  std::optional<double> half_window, window_shift, fence_k, max_distance;
  std::optional<int> offset, jobs;
  bool no_date_filter = false;
};

RunConfig resolve_config(const EstimateFlags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (!f.houses.empty()) c.houses_path = f.houses;
  if (!f.bundles.empty()) c.bundles_path = f.bundles;
  if (!f.output.empty()) c.output_path = f.output;
  auto j = c.to_json();
  if (!f.sampling.empty()) j["sampling"] = f.sampling;
  if (!f.final_subset.empty()) j["final_subset"] = f.final_subset;
  if (f.half_window) j["half_window_deg"] = *f.half_window;
  if (f.window_shift) j["window_shift_deg"] = *f.window_shift;
  if (f.fence_k) j["fence_k"] = *f.fence_k;
  if (f.max_distance) j["max_distance_m"] = *f.max_distance;
  if (f.offset) j["roadside_offset_px"] = *f.offset;
  if (f.jobs) j["jobs"] = *f.jobs;
  if (!f.min_date.empty()) j["captured_on_or_after"] = f.min_date;
  if (f.no_date_filter) j["captured_on_or_after"] = nullptr;
  c = RunConfig::from_json(j);
  if (c.houses_path.empty() || c.bundles_path.empty() || c.output_path.empty())
    throw CLI::ValidationError("houses, bundles and output are required (flags or config)");
  return c;
}

int cmd_estimate(const EstimateFlags& flags) {
  const auto cfg = resolve_config(flags);
  const auto houses = load_houses(cfg.houses_path);
  const auto bundles = load_bundles(cfg.bundles_path);
  const auto result = run_estimates(houses, bundles, cfg);
  fs::create_directories(cfg.output_path);
  {
    std::ofstream out(fs::path(cfg.output_path) / "estimates.csv");
    write_estimates(out, result.rows);
  }
  {
    std::ofstream out(fs::path(cfg.output_path) / "funnel.csv");
    write_funnel(out, report::funnel(result.funnel));
  }
  std::size_t ok = 0;
  for (const auto& r : result.rows) ok += r.lfe.has_value();
  std::fprintf(stderr, "%zu of %zu houses estimated\n", ok, result.rows.size());
  return (ok == 0 && !result.rows.empty()) ? kAllFailed : 0;
}

int cmd_evaluate(const std::string& estimates, const std::string& houses, const std::string& output,
                 const std::string& groups, bool by_visibility, const std::string& compare) {
  EvaluateOptions opt;
  opt.group_by_visibility = by_visibility;
  if (!groups.empty()) {
    std::ifstream in(groups);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + groups);
    std::string line;
    std::getline(in, line);
    std::map<std::string, std::string> g;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      ++row;
      if (line.empty()) continue;
      const auto f = csv::split(line, row);
      if (f.size() != 2) throw ParseError(row, "group file rows are house_id,group");
      g[f[0]] = f[1];
    }
    opt.groups = std::move(g);
  }
  if (!compare.empty()) opt.compare = load_estimates(compare);
  const auto ev = evaluate(load_estimates(estimates), load_houses(houses), opt);
  write_evaluation(output, ev, opt);
  std::printf("n=%zu mae_m=%.4f mae_pct=%.3f\n", ev.mae.n, ev.mae.meters, ev.mae.percent_per_house);
  return 0;
}

int cmd_synth(const std::vector<std::string>& scenes, const std::string& sweep_path, const std::string& out,
              int height, int depth_height) {
  if (!sweep_path.empty()) {
    const auto j = read_json(sweep_path);
    synth::SweepGrid grid;
    synth::Scene base;
    try {
      if (j.contains("scene")) base = synth::scene_from_json(j.at("scene"));
      grid.distances_m = j.at("distances_m").get<std::vector<double>>();
      grid.camera_heights_m = j.value("camera_heights_m", grid.camera_heights_m);
      grid.door_heights_m = j.value("door_heights_m", grid.door_heights_m);
      grid.depth_heights = j.value("depth_heights", grid.depth_heights);
      grid.pano_height = j.value("pano_height", grid.pano_height);
      grid.seed = j.value("seed", grid.seed);
      if (j.contains("modes")) {
        grid.modes.clear();
        for (const auto& m : j.at("modes")) {
          const auto s = m.get<std::string>();
          if (s == "plane_exact") grid.modes.push_back(SamplingMode::PlaneExact);
          else if (s == "nearest_pixel") grid.modes.push_back(SamplingMode::NearestPixel);
          else throw Error(ErrorCode::ParseError, "unknown mode " + s);
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, sweep_path + ": " + e.what());
    }
    const auto rows = synth::sweep(base, grid);
    fs::create_directories(out);
    std::ofstream os(fs::path(out) / "sweep.csv");
    os << "distance_m,camera_height_m,door_height_m,depth_height,mode,yaw_deg,lfe_abs_error_m,re_abs_error_m,"
          "hdsl_abs_error_m,error\n";
    for (const auto& r : rows)
      os << report::num(r.distance_m, 3) << ',' << report::num(r.camera_height_m, 3) << ','
         << report::num(r.door_height_m, 3) << ',' << r.depth_height << ','
         << (r.mode == SamplingMode::PlaneExact ? "plane_exact" : "nearest_pixel") << ','
         << report::num(r.yaw_deg, 6) << ',' << report::num(r.lfe_abs_error) << ','
         << report::num(r.re_abs_error) << ',' << report::num(r.hdsl_abs_error) << ',' << r.error << '\n';
    std::printf("rows=%zu\n", rows.size());
    return 0;
  }

  if (scenes.empty()) throw CLI::ValidationError("give --scene or --sweep");
  const auto geom = PanoramaGeometry::from_height(height);
  std::vector<HouseRecord> houses;
  for (const auto& path : scenes) {
    const auto scene = synth::scene_from_json(read_json(path));
    const auto r = synth::render(scene, geom, depth_height);
    PanoramaBundle b;
    b.pano_id = scene.pano_id;
    b.pose = r.pose;
    b.width = geom.width;
    b.height = geom.height;
    b.depthmap = encode_depthmap(r.depth);
    b.address = scene.address;
    save_bundle(fs::path(out) / "bundles", b, {r.mask, std::nullopt});
    houses.push_back({scene.house_id, scene.address, r.house, r.truth.lfe, std::nullopt});
    std::printf("%s lfe=%.4f re=%.4f hdsl=%.4f\n", scene.house_id.c_str(), r.truth.lfe, r.truth.re, r.truth.hdsl);
  }
  std::sort(houses.begin(), houses.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  save_houses(fs::path(out) / "houses.csv", houses);
  return 0;
}

int cmd_fetch(const std::string& ids_path, FetchConfig cfg, const std::string& out) {
  auto env = [](const char* name, std::string& field) {
    if (const char* v = std::getenv(name); v && field.empty()) field = v;
  };
  env("FLOORLINE_METADATA_URL", cfg.metadata_url);
  env("FLOORLINE_DEPTHMAP_URL", cfg.depthmap_url);
  env("FLOORLINE_TILE_URL", cfg.tile_url);
  if (cfg.metadata_url.empty() || cfg.depthmap_url.empty())
    throw CLI::ValidationError("metadata and depthmap URL templates are required");
  std::vector<std::string> ids;
  std::ifstream in(ids_path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + ids_path);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ids.push_back(line);
  const auto results = fetch_bundles(ids, cfg, out);
  int failed = 0;
  for (const auto& r : results) {
    if (r.error) {
      ++failed;
      std::fprintf(stderr, "%s: %s\n", r.pano_id.c_str(), r.message.c_str());
    }
  }
  std::printf("fetched=%zu failed=%d\n", results.size() - failed, failed);
  if (failed == 0) return 0;
  return failed == int(results.size()) ? kAllFailed : kDataError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lowest floor elevation from street-view panoramas"};
  app.require_subcommand(1);

  auto* decode = app.add_subcommand("decode", "Decode a depthmap and print its size");
  std::string decode_path, sidecar, reencode;
  decode->add_option("depthmap", decode_path, "Encoded depthmap (.b64)")->required();
  decode->add_option("--sidecar", sidecar, "Write a JSON summary of the plane table");
  decode->add_option("--reencode", reencode, "Write the map re-encoded");

  auto* estimate = app.add_subcommand("estimate", "Estimate LFE, RE and HDSL for every house");
  EstimateFlags ef;
  estimate->add_option("--config", ef.config, "RunConfig JSON");
  estimate->add_option("--houses", ef.houses, "House table CSV");
  estimate->add_option("--bundles", ef.bundles, "Bundle directory");
  estimate->add_option("--output", ef.output, "Output directory");
  estimate->add_option("--sampling", ef.sampling, "plane_exact or nearest_pixel")
      ->check(CLI::IsMember({"plane_exact", "nearest_pixel"}));
  estimate->add_option("--final-subset", ef.final_subset, "below_median or visibility_subset")
      ->check(CLI::IsMember({"below_median", "visibility_subset"}));
  estimate->add_option("--half-window", ef.half_window, "Search window half width, degrees (45)");
  estimate->add_option("--window-shift", ef.window_shift, "Window translation, degrees (22.5)");
  estimate->add_option("--roadside-offset", ef.offset, "Fallback roadside offset at 8192 rows (20)");
  estimate->add_option("--fence-k", ef.fence_k, "Outlier fence multiplier (1.5)");
  estimate->add_option("--max-distance", ef.max_distance, "Camera to house cap, metres (60)");
  estimate->add_option("--min-date", ef.min_date, "Earliest capture date (2016-01-01)");
  estimate->add_flag("--no-date-filter", ef.no_date_filter, "Accept any capture date");
  estimate->add_option("--jobs", ef.jobs, "Worker threads");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Compare estimates with ground truth");
  std::string est_path, truth_path, eval_out, groups, compare;
  bool by_visibility = false;
  evaluate_cmd->add_option("--estimates", est_path, "estimates.csv")->required();
  evaluate_cmd->add_option("--houses", truth_path, "House table with lfe_truth_m")->required();
  evaluate_cmd->add_option("--output", eval_out, "Report directory")->required();
  evaluate_cmd->add_option("--groups", groups, "CSV house_id,group for Kruskal-Wallis");
  evaluate_cmd->add_flag("--group-by-visibility", by_visibility, "Kruskal-Wallis over complete vs partial");
  evaluate_cmd->add_option("--compare", compare, "Second estimates.csv for a paired t-test on |error|");

  auto* synth_cmd = app.add_subcommand("synth", "Render synthetic scenes or run a sweep");
  std::vector<std::string> scenes;
  std::string sweep, synth_out;
  int height = 1024, depth_height = 256;
  synth_cmd->add_option("--scene", scenes, "Scene JSON (repeatable)");
  synth_cmd->add_option("--sweep", sweep, "Sweep grid JSON");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--height", height, "Panorama height in pixels")->check(CLI::Range(2, 16384));
  synth_cmd->add_option("--depth-height", depth_height, "Depthmap height in pixels")->check(CLI::Range(1, 4096));

  auto* fetch = app.add_subcommand("fetch", "Download panorama bundles");
  std::string ids_path, fetch_out;
  FetchConfig fc;
  fetch->add_option("--ids", ids_path, "File with one pano id per line")->required();
  fetch->add_option("--out", fetch_out, "Bundle directory")->required();
  fetch->add_option("--metadata-url", fc.metadata_url, "Template, or FLOORLINE_METADATA_URL");
  fetch->add_option("--depthmap-url", fc.depthmap_url, "Template, or FLOORLINE_DEPTHMAP_URL");
  fetch->add_option("--tile-url", fc.tile_url, "Template, or FLOORLINE_TILE_URL");
  fetch->add_option("--zoom", fc.zoom, "Value for {zoom}");
  fetch->add_option("--tile-size", fc.tile_size, "Tile edge in pixels")->check(CLI::PositiveNumber);
  fetch->add_option("--jobs", fc.max_in_flight, "Concurrent downloads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*decode) return cmd_decode(decode_path, sidecar, reencode);
    if (*estimate) return cmd_estimate(ef);
    if (*evaluate_cmd) return cmd_evaluate(est_path, truth_path, eval_out, groups, by_visibility, compare);
    if (*synth_cmd) return cmd_synth(scenes, sweep, synth_out, height, depth_height);
    if (*fetch) return cmd_fetch(ids_path, fc, fetch_out);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(to_string(e.code())).c_str(), e.what());
    return kDataError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  }
  return kUsage;
}
