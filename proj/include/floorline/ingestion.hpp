#pragma once

// House tables, panorama bundles on disk, house/panorama matching and the
// optional HTTP fetcher.
//
// Bundle layout, one directory per panorama:
//
//   <root>/<pano_id>/metadata.json   pano_id, lat, lon, elevation_msl_m, yaw_deg, date, width, height [, address]
//   <root>/<pano_id>/depth.b64       encoded depthmap
//   <root>/<pano_id>/mask.png        label codes (optional)
//   <root>/<pano_id>/mask.json       door instances (optional)
//   <root>/<pano_id>/pano.png        RGB imagery (optional)

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "floorline/date.hpp"
#include "floorline/depth_codec.hpp"
#include "floorline/error.hpp"
#include "floorline/estimator.hpp"
#include "floorline/extraction.hpp"
#include "floorline/geo.hpp"
#include "floorline/label_mask.hpp"
#include "floorline/pipeline.hpp"
#include "floorline/png_io.hpp"
#include "httplib.h"
#include "json.hpp"

namespace floorline {

namespace fs = std::filesystem;

struct HouseRecord {
  std::string id;
  std::string address;
  GeoPoint location;
  std::optional<double> lfe_truth_m;
  std::optional<Date> reconstruction_date;

  bool operator==(const HouseRecord&) const = default;
};

// ---------------------------------------------------------------------------
// CSV

namespace csv {

/// Splits one record. Quoted fields may contain commas and doubled quotes;
/// embedded newlines are not supported.
inline std::vector<std::string> split(const std::string& line, std::size_t row) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') { cur += '"'; ++i; }
        else quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty() && !was_quoted) {
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError(row, "unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace csv

inline constexpr const char* kHouseHeader = "id,address,lat,lon,lfe_truth_m,reconstruction_date";

inline std::vector<HouseRecord> parse_houses(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(0, "empty house table");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHouseHeader) throw ParseError(0, "house table header must be '" + std::string(kHouseHeader) + "'");

  std::vector<HouseRecord> out;
  std::set<std::string> ids;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++row;
    if (line.empty()) continue;
    const auto f = csv::split(line, row);
    if (f.size() != 6) throw ParseError(row, "expected 6 fields, got " + std::to_string(f.size()));
    auto number = [&](const std::string& s, const char* what) {
      if (s.empty()) throw ParseError(row, std::string("missing ") + what);
      std::size_t used = 0;
      double v = 0;
      try { v = std::stod(s, &used); } catch (const std::exception&) { used = 0; }
      if (used != s.size() || !std::isfinite(v)) throw ParseError(row, std::string("bad ") + what + " '" + s + "'");
      return v;
    };
    HouseRecord h;
    h.id = f[0];
    if (h.id.empty()) throw ParseError(row, "missing id");
    if (!ids.insert(h.id).second) throw ParseError(row, "duplicate id '" + h.id + "'");
    h.address = f[1];
    h.location = {number(f[2], "lat"), number(f[3], "lon")};
    if (!h.location.valid()) throw ParseError(row, "location out of range");
    if (!f[4].empty()) h.lfe_truth_m = number(f[4], "lfe_truth_m");
    if (!f[5].empty()) {
      try { h.reconstruction_date = Date::parse(f[5]); }
      catch (const Error&) { throw ParseError(row, "bad reconstruction_date '" + f[5] + "'"); }
    }
    out.push_back(std::move(h));
  }
  return out;
}

inline std::vector<HouseRecord> load_houses(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return parse_houses(in);
}

inline void write_houses(std::ostream& out, const std::vector<HouseRecord>& houses) {
  out << kHouseHeader << '\n';
  for (const auto& h : houses) {
    out << csv::quote(h.id) << ',' << csv::quote(h.address) << ',' << csv::fmt(h.location.lat) << ','
        << csv::fmt(h.location.lon) << ',' << (h.lfe_truth_m ? csv::fmt(*h.lfe_truth_m) : "") << ','
        << (h.reconstruction_date ? h.reconstruction_date->str() : "") << '\n';
  }
}

inline void save_houses(const fs::path& path, const std::vector<HouseRecord>& houses) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_houses(out, houses);
}

// ---------------------------------------------------------------------------
// Bundles

struct PanoramaBundle {
  std::string pano_id;
  CameraPose pose;
  int width = 0;   // panorama dimensions
  int height = 0;
  std::string depthmap;  // encoded text
  std::string address;
  fs::path dir;          // empty for in-memory bundles

  bool has_mask() const { return !dir.empty() && fs::exists(dir / "mask.png"); }
  bool has_imagery() const { return !dir.empty() && fs::exists(dir / "pano.png"); }
  PanoramaGeometry geometry() const { return {width, height}; }
};

inline nlohmann::json bundle_metadata(const PanoramaBundle& b) {
  nlohmann::json j = {{"pano_id", b.pano_id},
                      {"lat", b.pose.location.lat},
                      {"lon", b.pose.location.lon},
                      {"elevation_msl_m", b.pose.elevation_m},
                      {"yaw_deg", b.pose.yaw_deg},
                      {"date", b.pose.captured.str()},
                      {"width", b.width},
                      {"height", b.height}};
  if (!b.address.empty()) j["address"] = b.address;
  return j;
}

inline PanoramaBundle bundle_from_metadata(const nlohmann::json& j) {
  try {
    PanoramaBundle b;
    b.pano_id = j.at("pano_id").get<std::string>();
    b.pose.location = {j.at("lat").get<double>(), j.at("lon").get<double>()};
    b.pose.elevation_m = j.at("elevation_msl_m").get<double>();
    b.pose.yaw_deg = normalize_deg(j.at("yaw_deg").get<double>());
    b.pose.captured = Date::parse(j.at("date").get<std::string>());
    b.width = j.at("width").get<int>();
    b.height = j.at("height").get<int>();
    b.address = j.value("address", "");
    if (b.pano_id.empty() || b.pano_id.find_first_of("/\\") != std::string::npos || b.pano_id[0] == '.')
      throw Error(ErrorCode::SchemaError, "unusable pano_id '" + b.pano_id + "'");
    if (!b.pose.location.valid()) throw Error(ErrorCode::SchemaError, "camera location out of range");
    if (!std::isfinite(b.pose.elevation_m)) throw Error(ErrorCode::SchemaError, "camera elevation not finite");
    if (!b.geometry().valid()) throw Error(ErrorCode::SchemaError, "panorama must be 2:1");
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("metadata: ") + e.what());
  }
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  out << s;
}

inline bool bundle_complete(const fs::path& dir, bool need_imagery = false) {
  return fs::exists(dir / "metadata.json") && fs::exists(dir / "depth.b64") &&
         (!need_imagery || fs::exists(dir / "pano.png"));
}

inline PanoramaBundle load_bundle(const fs::path& dir) {
  if (!bundle_complete(dir)) throw Error(ErrorCode::IncompleteBundle, dir.string() + " lacks metadata or depthmap");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(dir / "metadata.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, (dir / "metadata.json").string() + ": " + e.what());
  }
  auto b = bundle_from_metadata(j);
  b.depthmap = read_text(dir / "depth.b64");
  while (!b.depthmap.empty() && std::isspace(static_cast<unsigned char>(b.depthmap.back()))) b.depthmap.pop_back();
  b.dir = dir;
  return b;
}

inline LabelMask load_bundle_mask(const PanoramaBundle& b) {
  if (!b.has_mask()) throw Error(ErrorCode::NoVisibleDoor, "bundle " + b.pano_id + " has no mask");
  auto mask = load_mask(b.dir / "mask.png", b.dir / "mask.json");
  if (mask.width != b.width || mask.height != b.height)
    throw Error(ErrorCode::SchemaError, "mask of " + b.pano_id + " does not match the panorama size");
  return mask;
}

/// All bundle directories under `root`, ordered by pano_id.
inline std::vector<PanoramaBundle> load_bundles(const fs::path& root) {
  std::vector<PanoramaBundle> out;
  if (!fs::is_directory(root)) throw Error(ErrorCode::IoError, root.string() + " is not a directory");
  for (const auto& e : fs::directory_iterator(root)) {
    const auto name = e.path().filename().string();
    if (!e.is_directory() || name.empty() || name[0] == '.') continue;
    out.push_back(load_bundle(e.path()));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.pano_id < b.pano_id; });
  return out;
}

struct BundleFiles {
  std::optional<LabelMask> mask;
  std::optional<png::Image> imagery;
};

/// Writes the bundle to <root>/<pano_id> via a temporary sibling directory
/// and a rename, replacing any previous copy.
inline fs::path save_bundle(const fs::path& root, const PanoramaBundle& b, const BundleFiles& files = {}) {
  decode_depthmap(b.depthmap);
  if (files.mask && (files.mask->width != b.width || files.mask->height != b.height))
    throw Error(ErrorCode::SchemaError, "mask dimensions differ from the panorama");
  bundle_from_metadata(bundle_metadata(b));

  fs::create_directories(root);
  const auto final_dir = root / b.pano_id;
  std::random_device rd;
  const auto tmp = root / ("." + b.pano_id + ".tmp" + std::to_string(rd()));
  fs::create_directory(tmp);
  try {
    write_text(tmp / "metadata.json", bundle_metadata(b).dump(2) + "\n");
    write_text(tmp / "depth.b64", b.depthmap + "\n");
    if (files.mask) save_mask(*files.mask, tmp / "mask.png", tmp / "mask.json");
    if (files.imagery) png::write(tmp / "pano.png", *files.imagery);
    if (fs::exists(final_dir)) {
      const auto old = root / ("." + b.pano_id + ".old" + std::to_string(rd()));
      fs::rename(final_dir, old);
      fs::rename(tmp, final_dir);
      fs::remove_all(old);
    } else {
      fs::rename(tmp, final_dir);
    }
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
  return final_dir;
}

// ---------------------------------------------------------------------------
// Matching

/// Lower case, punctuation dropped, common street words abbreviated.
inline std::string normalize_address(const std::string& address) {
  static const std::map<std::string, std::string> abbrev = {
      {"street", "st"},   {"avenue", "ave"},   {"av", "ave"},     {"road", "rd"},     {"drive", "dr"},
      {"boulevard", "blvd"}, {"lane", "ln"},   {"court", "ct"},   {"place", "pl"},    {"circle", "cir"},
      {"parkway", "pkwy"}, {"terrace", "ter"}, {"highway", "hwy"}, {"square", "sq"},  {"trail", "trl"},
      {"north", "n"},     {"south", "s"},      {"east", "e"},     {"west", "w"},      {"northeast", "ne"},
      {"northwest", "nw"}, {"southeast", "se"}, {"southwest", "sw"}};
  std::string cleaned;
  for (char c : address) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) cleaned += static_cast<char>(std::tolower(u));
    else if (c != '.' && c != '\'') cleaned += ' ';
  }
  std::istringstream words(cleaned);
  std::string w, out;
  while (words >> w) {
    if (auto it = abbrev.find(w); it != abbrev.end()) w = it->second;
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

struct MatchOptions {
  double max_distance_m = 60.0;
  std::optional<Date> captured_on_or_after = Date{2016, 1, 1};
};

inline bool eligible(const HouseRecord& h, const PanoramaBundle& b, const MatchOptions& opt = {}) {
  if (distance_m(h.location, b.pose.location) > opt.max_distance_m) return false;
  if (opt.captured_on_or_after && b.pose.captured < *opt.captured_on_or_after) return false;
  if (h.reconstruction_date && !(b.pose.captured > *h.reconstruction_date)) return false;
  return true;
}

/// Eligible bundles, exact-address matches first, then by distance.
inline std::vector<const PanoramaBundle*> candidates(const HouseRecord& h, const std::vector<PanoramaBundle>& bundles,
                                                     const MatchOptions& opt = {}) {
  const auto key = normalize_address(h.address);
  std::vector<std::pair<std::tuple<int, double, std::string>, const PanoramaBundle*>> ranked;
  for (const auto& b : bundles) {
    if (!eligible(h, b, opt)) continue;
    const bool same = !key.empty() && normalize_address(b.address) == key;
    ranked.push_back({{same ? 0 : 1, distance_m(h.location, b.pose.location), b.pano_id}, &b});
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<const PanoramaBundle*> out;
  for (const auto& r : ranked) out.push_back(r.second);
  return out;
}

inline const PanoramaBundle* match_house(const HouseRecord& h, const std::vector<PanoramaBundle>& bundles,
                                         const MatchOptions& opt = {}) {
  const auto c = candidates(h, bundles, opt);
  return c.empty() ? nullptr : c.front();
}

struct Candidate {
  const PanoramaBundle* bundle = nullptr;
  const LabelMask* mask = nullptr;
};

struct Selection {
  std::size_t index = 0;     // into the candidate list
  int door_columns = 0;      // bottom-edge columns inside the house window
};

/// Bottom-edge columns of the door the pipeline would use, or 0.
inline int visible_door_columns(const PanoramaBundle& b, const LabelMask& mask, const HouseRecord& h,
                                const PipelineOptions& opt = {}) {
  if (distance_m(b.pose.location, h.location) < 1e-3) return 0;
  const auto found = locate_door(mask, bearing_to(b.pose.location, h.location), b.pose.yaw_deg, opt);
  if (!found) return 0;
  return static_cast<int>(trace_door_bottom(mask, found->door, found->span).pixels.size());
}

/// Most door-bottom columns wins; ties go to the nearer camera, then the
/// newer capture.
inline Selection select_best_image(const std::vector<Candidate>& cands, const HouseRecord& h,
                                   const PipelineOptions& opt = {}) {
  std::optional<Selection> best;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (!cands[i].mask) continue;
    const int cols = visible_door_columns(*cands[i].bundle, *cands[i].mask, h, opt);
    if (cols == 0) continue;
    if (!best) { best = Selection{i, cols}; continue; }
    const auto& cur = *cands[best->index].bundle;
    const auto& cand = *cands[i].bundle;
    const double dc = distance_m(cur.pose.location, h.location), dn = distance_m(cand.pose.location, h.location);
    if (cols > best->door_columns ||
        (cols == best->door_columns && (dn < dc || (dn == dc && cand.pose.captured > cur.pose.captured))))
      best = Selection{i, cols};
  }
  if (!best) throw Error(ErrorCode::NoVisibleDoor, "no candidate shows a door for house " + h.id);
  return *best;
}

// ---------------------------------------------------------------------------
// Fetching

/// URL templates may use {pano_id}, {zoom}, {x} and {y}. Only plain http
/// endpoints are supported.
struct FetchConfig {
  std::string metadata_url;
  std::string depthmap_url;
  std::string tile_url;  // empty: no imagery
  int zoom = 0;
  int tile_size = 512;
  int max_in_flight = 4;
  int timeout_s = 30;
};

inline std::string expand(std::string tpl, const std::map<std::string, std::string>& vars) {
  for (const auto& [k, v] : vars) {
    const std::string key = "{" + k + "}";
    for (auto pos = tpl.find(key); pos != std::string::npos; pos = tpl.find(key, pos + v.size()))
      tpl.replace(pos, key.size(), v);
  }
  return tpl;
}

struct HttpResult {
  int status = 0;
  std::string body;
};

inline HttpResult http_get(const std::string& url, int timeout_s) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) throw Error(ErrorCode::HttpError, "unsupported URL '" + url + "'");
  const auto slash = url.find('/', scheme.size());
  const auto host = url.substr(0, slash);
  const auto path = slash == std::string::npos ? std::string("/") : url.substr(slash);
  httplib::Client cli(host);
  cli.set_connection_timeout(timeout_s);
  cli.set_read_timeout(timeout_s);
  auto res = cli.Get(path);
  if (!res) throw Error(ErrorCode::HttpError, "GET " + url + ": " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

inline std::string fetch_required(const std::string& url, int timeout_s) {
  auto r = http_get(url, timeout_s);
  if (r.status != 200) throw Error(ErrorCode::HttpError, "GET " + url + ": status " + std::to_string(r.status));
  return std::move(r.body);
}

/// Downloads one panorama into <root>/<pano_id>. A complete bundle already on
/// disk is returned without touching the network.
inline PanoramaBundle fetch_bundle(const std::string& pano_id, const FetchConfig& cfg, const fs::path& root) {
  const bool want_tiles = !cfg.tile_url.empty();
  if (bundle_complete(root / pano_id, want_tiles)) return load_bundle(root / pano_id);

  const std::map<std::string, std::string> base = {{"pano_id", pano_id}, {"zoom", std::to_string(cfg.zoom)}};
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(fetch_required(expand(cfg.metadata_url, base), cfg.timeout_s));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, "metadata for " + pano_id + ": " + e.what());
  }
  auto b = bundle_from_metadata(meta);
  if (b.pano_id != pano_id) throw Error(ErrorCode::SchemaError, "metadata names pano " + b.pano_id);
  b.depthmap = fetch_required(expand(cfg.depthmap_url, base), cfg.timeout_s);
  while (!b.depthmap.empty() && std::isspace(static_cast<unsigned char>(b.depthmap.back()))) b.depthmap.pop_back();
  decode_depthmap(b.depthmap);

  BundleFiles files;
  if (want_tiles) {
    const int ts = cfg.tile_size;
    const int nx = (b.width + ts - 1) / ts, ny = (b.height + ts - 1) / ts;
    png::Image pano{b.width, b.height, 3, std::vector<std::uint8_t>(std::size_t(b.width) * b.height * 3, 0)};
    for (int ty = 0; ty < ny; ++ty)
      for (int tx = 0; tx < nx; ++tx) {
        auto vars = base;
        vars["x"] = std::to_string(tx);
        vars["y"] = std::to_string(ty);
        const auto url = expand(cfg.tile_url, vars);
        const auto r = http_get(url, cfg.timeout_s);
        if (r.status == 404) throw Error(ErrorCode::IncompleteBundle, "missing tile " + url);
        if (r.status != 200) throw Error(ErrorCode::HttpError, "GET " + url + ": status " + std::to_string(r.status));
        const auto tile = png::read_rgb_memory(r.body);
        const int w = std::min(tile.width, b.width - tx * ts), h = std::min(tile.height, b.height - ty * ts);
        if (w < std::min(ts, b.width - tx * ts) || h < std::min(ts, b.height - ty * ts))
          throw Error(ErrorCode::IncompleteBundle, "tile " + url + " is smaller than the tile grid");
        for (int y = 0; y < h; ++y)
          std::copy_n(tile.pixels.begin() + std::size_t(y) * tile.width * 3, std::size_t(w) * 3,
                      pano.pixels.begin() + (std::size_t(ty * ts + y) * b.width + std::size_t(tx) * ts) * 3);
      }
    files.imagery = std::move(pano);
  }
  b.dir = save_bundle(root, b, files);
  return b;
}

struct FetchOutcome {
  std::string pano_id;
  std::optional<PanoramaBundle> bundle;
  std::optional<ErrorCode> error;
  std::string message;
};

/// Fetches several panoramas with at most cfg.max_in_flight concurrent
/// downloads. Results follow the input order.
inline std::vector<FetchOutcome> fetch_bundles(const std::vector<std::string>& ids, const FetchConfig& cfg,
                                               const fs::path& root) {
  std::vector<FetchOutcome> out(ids.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < ids.size();) {
      out[i].pano_id = ids[i];
      try {
        out[i].bundle = fetch_bundle(ids[i], cfg, root);
      } catch (const Error& e) {
        out[i].error = e.code();
        out[i].message = e.what();
      }
    }
  };
  const int n = std::clamp<int>(cfg.max_in_flight, 1, std::max<int>(1, int(ids.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace floorline
