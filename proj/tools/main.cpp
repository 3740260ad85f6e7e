#include "plrp/augment.hpp"
#include "plrp/diagnostics.hpp"
#include "plrp/error.hpp"
#include "plrp/image_io.hpp"
#include "plrp/lrp.hpp"
#include "plrp/metrics.hpp"
#include "plrp/model_io.hpp"
#include "plrp/render.hpp"
#include "plrp/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace plrp;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDetected = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void report_error(std::string_view kind, const std::string& message, int code) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  j["exitCode"] = code;
  std::cerr << j.dump() << '\n';
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// Files are written under temporary names and only renamed into place once
// every output has been produced.
class StagedOutputs {
public:
  StagedOutputs() = default;
  StagedOutputs(const StagedOutputs&) = delete;
  StagedOutputs& operator=(const StagedOutputs&) = delete;
  ~StagedOutputs() {
    std::error_code ec;
    for (const auto& [tmp, final_path] : files_) fs::remove(tmp, ec);
  }

  fs::path stage(const fs::path& final_path) {
    ensure_parent(final_path);
    fs::path tmp = final_path;
    tmp.replace_filename(final_path.stem().string() + ".partial" + final_path.extension().string());
    files_.emplace_back(tmp, final_path);
    return tmp;
  }

  void write(const fs::path& final_path, std::string_view bytes) {
    const fs::path tmp = stage(final_path);
    std::ofstream out(tmp, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write " + final_path.string());
  }

  void write_image(const fs::path& final_path, const image::Image& img) {
    image::write_image(stage(final_path), img);
  }

  void commit() {
    for (const auto& [tmp, final_path] : files_) fs::rename(tmp, final_path);
    files_.clear();
  }

private:
  std::vector<std::pair<fs::path, fs::path>> files_;
};

// ---------------------------------------------------------------------------
// Shared option parsing

struct ModelArgs {
  std::string manifest;
  std::string weights;
};

struct ExplainArgs {
  std::string polarity = "auto";
  std::string init = "prob";
};

struct RenderArgs {
  std::string colormap = "grayscale";
  double clip = 99.0;
  std::string size;
};

void add_model_options(CLI::App* cmd, ModelArgs& m, bool required) {
  auto* a = cmd->add_option("--model", m.manifest, "Model manifest (JSON)");
  auto* b = cmd->add_option("--weights", m.weights, "Model weights blob");
  if (required) {
    a->required();
    b->required();
  }
}

void add_explain_options(CLI::App* cmd, ExplainArgs& e) {
  cmd->add_option("--polarity", e.polarity, "auto|positive|negative")
      ->check(CLI::IsMember({"auto", "positive", "negative"}))
      ->capture_default_str();
  cmd->add_option("--init-relevance", e.init, "prob|one|logit")
      ->check(CLI::IsMember({"prob", "one", "logit"}))
      ->capture_default_str();
}

void add_render_options(CLI::App* cmd, RenderArgs& r) {
  cmd->add_option("--colormap", r.colormap, "grayscale|heat")
      ->check(CLI::IsMember({"grayscale", "heat"}))
      ->capture_default_str();
  cmd->add_option("--clip", r.clip, "Clip percentile in (50, 100]")->capture_default_str();
  cmd->add_option("--size", r.size, "Output size HxW (default: 256x256 or the map size if larger)");
}

lrp::ExplainOptions explain_options(const ExplainArgs& e) {
  lrp::ExplainOptions o;
  if (e.polarity == "positive") o.polarity = lrp::PolaritySelection::positive;
  else if (e.polarity == "negative") o.polarity = lrp::PolaritySelection::negative;
  if (e.init == "one") o.initial = lrp::InitialRelevance::one;
  else if (e.init == "logit") o.initial = lrp::InitialRelevance::logit;
  return o;
}

render::OutputSize parse_size(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    const auto h = std::stoul(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    const auto w = std::stoul(text.substr(x + 1), &used);
    if (used != text.size() - x - 1 || h == 0 || w == 0) throw std::invalid_argument(text);
    return {h, w};
  } catch (const std::logic_error&) {
    throw UsageError("--size expects HxW, got '" + text + "'");
  }
}

render::HeatmapConfig heatmap_config(const RenderArgs& r, const Tensor& relevance) {
  if (!(r.clip > 50.0 && r.clip <= 100.0)) throw UsageError("--clip must lie in (50, 100]");
  render::HeatmapConfig c;
  c.colormap = r.colormap == "heat" ? render::Colormap::heat : render::Colormap::grayscale;
  c.clip_percentile = r.clip;
  if (!r.size.empty()) {
    c.output_size = parse_size(r.size);
  } else {
    const Tensor plane = render::collapse_channels(relevance);
    c.output_size = render::OutputSize{std::max<std::size_t>(256, plane.extent(0)),
                                       std::max<std::size_t>(256, plane.extent(1))};
  }
  return c;
}

diagnostics::Region parse_region(const std::string& text) {
  std::vector<std::size_t> v;
  std::size_t start = 0;
  try {
    while (start <= text.size()) {
      const auto comma = text.find(',', start);
      const std::string part = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      std::size_t used = 0;
      if (part.empty() || part.front() == '-') throw std::invalid_argument(part);
      v.push_back(std::stoul(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  } catch (const std::logic_error&) {
    v.clear();
  }
  if (v.size() != 4) throw UsageError("--region expects x,y,w,h, got '" + text + "'");
  return {v[0], v[1], v[2], v[3]};
}

diagnostics::Padding padding_from(const std::string& mode, double mu, double sigma, std::uint64_t seed) {
  if (mode == "noise") return diagnostics::NoisePadding{mu, sigma, seed};
  return diagnostics::ZeroPadding{};
}

// Container path P is stored as P.json + P.bin.
std::pair<fs::path, fs::path> container_paths(const fs::path& p) {
  fs::path manifest = p, blob = p;
  if (p.extension() == ".json" || p.extension() == ".bin") {
    manifest.replace_extension(".json");
    blob.replace_extension(".bin");
  } else {
    manifest += ".json";
    blob += ".bin";
  }
  return {manifest, blob};
}

Tensor load_input(const fs::path& path, const model::NetworkModel& m) {
  Tensor t = image::to_tensor(image::read_image(path));
  if (t.shape() != m.input_shape && t.size() == element_count(m.input_shape)) {
    t = reshape(t, m.input_shape);
  }
  return t;
}

fs::path sidecar_path(const fs::path& out) {
  fs::path p = out;
  p.replace_extension(".json");
  return p;
}

void print_text_or_json(bool json, const std::string& json_text, const std::string& text) {
  std::cout << (json ? json_text : text) << '\n';
}

// ---------------------------------------------------------------------------
// Commands

struct ExplainCmd {
  ModelArgs model;
  ExplainArgs explain;
  RenderArgs render;
  std::string image;
  std::string out = "heatmap.png";
  std::string raw_out;
  bool json = false;

  int run() const {
    const auto m = io::load_model(model.manifest, model.weights);
    const Tensor input = load_input(image, m);
    const auto map = lrp::explain(m, input, explain_options(explain));
    const auto heat = render::render_heatmap(map, heatmap_config(render, map.values));
    const std::string sidecar = report::explain_json(map, explain_options(explain).initial);

    StagedOutputs staged;
    staged.write_image(out, heat);
    staged.write(sidecar_path(out), sidecar + "\n");
    if (!raw_out.empty()) {
      const auto [manifest, blob] = container_paths(raw_out);
      io::TensorContainer c;
      c.tensors.emplace("relevance", map.values);
      c.metadata = {{"polarity", std::string(lrp::to_string(map.polarity))},
                    {"score", report::format_number(map.score)},
                    {"initialRelevance", report::format_number(map.initial_relevance)},
                    {"leakedRelevance", report::format_number(map.leaked_relevance)}};
      const fs::path tm = staged.stage(manifest), tb = staged.stage(blob);
      io::save_tensors(c, tm, tb);
    }
    staged.commit();
    if (json) std::cout << sidecar << '\n';
    else std::cout << "score " << report::format_number(map.score) << " polarity " << lrp::to_string(map.polarity)
                   << " leaked " << report::format_number(map.leaked_relevance) << " -> " << out << '\n';
    return 0;
  }
};

struct TrajectoryCmd {
  std::string dir;
  ExplainArgs explain;
  RenderArgs render;
  std::string image;
  std::string out = "trajectory";
  double bin_width = 1.0;
  bool json = false;

  int run() const {
    std::vector<std::pair<unsigned long long, fs::path>> found;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_directory()) continue;
      const std::string name = entry.path().filename().string();
      if (name.empty() || !std::all_of(name.begin(), name.end(), [](unsigned char c) { return std::isdigit(c); })) {
        std::cerr << "warning: skipping non-numeric checkpoint directory " << entry.path().string() << '\n';
        continue;
      }
      found.emplace_back(std::stoull(name), entry.path());
    }
    std::sort(found.begin(), found.end());
    if (found.size() < 2) throw ValueError("a trajectory needs at least two numeric checkpoint directories");

    std::vector<model::NetworkModel> models;
    for (const auto& [iteration, path] : found) {
      auto m = io::load_model(path / "model.json", path / "weights.bin");
      m.metadata[diagnostics::kIterationKey] = path.filename().string();
      models.push_back(std::move(m));
    }
    const Tensor input = load_input(image, models.front());
    const auto entries = diagnostics::compare_trajectory(models, input, explain_options(explain), bin_width);

    StagedOutputs staged;
    std::vector<image::Image> panels;
    std::vector<std::string> labels;
    for (const auto& e : entries) {
      auto heat = render::render_heatmap(e.map, heatmap_config(render, e.map.values));
      staged.write_image(fs::path(out) / ("heatmap_" + e.iteration + ".png"), heat);
      panels.push_back(std::move(heat));
      labels.push_back(e.iteration);
    }
    staged.write_image(fs::path(out) / "panel.png", render::render_side_by_side(panels, labels));
    const std::string csv = report::trajectory_csv(entries);
    staged.write(fs::path(out) / "trajectory.csv", csv);
    staged.commit();

    if (json) {
      nlohmann::ordered_json j = nlohmann::ordered_json::array();
      for (const auto& e : entries) {
        j.push_back({{"iteration", e.iteration},
                     {"score", e.score},
                     {"polarity", std::string(lrp::to_string(e.map.polarity))},
                     {"leakedRelevance", e.map.leaked_relevance}});
      }
      std::cout << j.dump() << '\n';
    } else {
      std::cout << csv;
    }
    return 0;
  }
};

struct DiagnoseCmd {
  std::string image;
  std::vector<std::string> regions;
  std::string out;
  bool json = false;

  int run() const {
    std::vector<diagnostics::Region> parsed;
    for (const auto& r : regions) parsed.push_back(parse_region(r));
    const Tensor img = image::to_tensor(image::read_image(image));
    std::vector<diagnostics::RegionHistogram> hists;
    for (const auto& r : parsed) hists.push_back(diagnostics::region_histogram(img, r));
    const std::string j = report::histograms_json(hists);
    if (!out.empty()) {
      StagedOutputs staged;
      staged.write(out, j + "\n");
      staged.commit();
    }
    std::string text;
    for (std::size_t i = 0; i < hists.size(); ++i) {
      const auto& h = hists[i];
      text += "region " + std::to_string(i) + " (" + regions[i] + "): " + std::to_string(h.count) +
              " px, " + std::to_string(h.bins[0]) + " at level 0\n";
    }
    for (std::size_t a = 0; a < hists.size(); ++a) {
      for (std::size_t b = a + 1; b < hists.size(); ++b) {
        if (hists[a].count != hists[b].count) continue;
        const auto d = diagnostics::histogram_divergence(hists[a], hists[b]);
        text += "regions " + std::to_string(a) + "," + std::to_string(b) +
                ": chi-square " + report::format_number(d.chi_square) +
                ", ks " + report::format_number(d.ks_statistic) + "\n";
      }
    }
    if (!text.empty()) text.pop_back();
    print_text_or_json(json, j, text);
    return 0;
  }
};

struct DetectCmd {
  std::vector<std::string> maps;
  ModelArgs model;
  ExplainArgs explain;
  std::vector<std::string> images;
  double threshold = diagnostics::kDefaultBoundaryThreshold;
  bool check = false;
  std::string out;
  bool json = false;

  int run() const {
    if (!(threshold > 0.0)) throw UsageError("--threshold must be positive");
    std::vector<Tensor> tensors;
    if (!maps.empty()) {
      if (!images.empty()) throw UsageError("use either --map or --model/--weights with --image, not both");
      for (const auto& p : maps) {
        const auto [manifest, blob] = container_paths(p);
        auto c = io::load_tensors(manifest, blob);
        auto it = c.tensors.find("relevance");
        if (it == c.tensors.end()) throw StructuralError(manifest.string() + " holds no 'relevance' tensor");
        tensors.push_back(std::move(it->second));
      }
    } else {
      if (images.empty() || model.manifest.empty() || model.weights.empty()) {
        throw UsageError("detect-boundary needs --map, or --model, --weights and --image");
      }
      const auto m = io::load_model(model.manifest, model.weights);
      for (const auto& p : images) tensors.push_back(lrp::explain(m, load_input(p, m), explain_options(explain)).values);
    }
    const auto r = diagnostics::detect_phantom_boundary(tensors, threshold);
    const std::string j = report::boundary_json(r, tensors.size());
    if (!out.empty()) {
      StagedOutputs staged;
      staged.write(out, j + "\n");
      staged.commit();
    }
    std::string text = "score " + report::format_number(r.score) + " threshold " + report::format_number(threshold);
    if (r.detected) {
      text += " boundary detected: top " + std::to_string(r.detected->top) + " left " +
              std::to_string(r.detected->left) + " bottom " + std::to_string(r.detected->bottom) + " right " +
              std::to_string(r.detected->right);
    } else {
      text += " no boundary";
    }
    print_text_or_json(json, j, text);
    return check && r.detected ? kExitDetected : 0;
  }
};

struct AugmentCmd {
  std::string image;
  std::vector<std::string> ops;
  std::string pad = "zero";
  double mu = 0.02;
  double sigma = 0.01;
  std::uint64_t seed = 42;
  std::string out = "augmented.png";

  int run() const {
    std::vector<diagnostics::AugmentOp> parsed;
    for (const auto& op : ops) {
      try {
        parsed.push_back(diagnostics::parse_augment_op(op));
      } catch (const ValueError& e) {
        throw UsageError(e.what());
      }
    }
    if (pad == "noise" && !(sigma >= 0.0)) throw UsageError("--noise-sigma must be >= 0");
    const Tensor img = image::to_tensor(image::read_image(image));
    const Tensor result = diagnostics::augment_image(img, parsed, padding_from(pad, mu, sigma, seed));
    StagedOutputs staged;
    staged.write_image(out, image::from_tensor(result));
    staged.commit();
    std::cout << out << '\n';
    return 0;
  }
};

struct MetricsCmd {
  std::string a;
  std::string b;
  bool json = false;

  int run() const {
    const Tensor ta = image::to_tensor(image::read_image(a));
    const Tensor tb = image::to_tensor(image::read_image(b));
    const double e = diagnostics::mse(ta, tb);
    const double p = diagnostics::psnr(ta, tb);
    const double s = diagnostics::ssim(ta, tb);
    print_text_or_json(json, report::metrics_json(e, p, s),
                       "mse " + report::format_number(e) + " psnr " + report::format_number(p) + " dB ssim " +
                           report::format_number(s));
    return 0;
  }
};

struct VerifyCmd {
  ModelArgs model;
  ExplainArgs explain;
  std::size_t samples = 100;
  std::uint64_t seed = 42;
  bool json = false;

  int run() const {
    if (samples == 0) throw UsageError("--samples must be positive");
    const auto m = io::load_model(model.manifest, model.weights);
    const auto options = explain_options(explain);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    double worst = 0.0, total_leaked = 0.0, max_leaked = 0.0;
    std::size_t worst_sample = 0, worst_layer = 0;
    for (std::size_t s = 0; s < samples; ++s) {
      std::vector<double> v(element_count(m.input_shape));
      for (double& x : v) x = uniform(rng);
      const auto map = lrp::explain(m, Tensor(m.input_shape, std::move(v)), options);
      const double scale = std::max(map.initial_relevance, 1e-300);
      for (const auto& row : lrp::conservation_report(map)) {
        const double residual = std::abs(row.before - row.after - row.leaked) / scale;
        if (residual > worst) {
          worst = residual;
          worst_sample = s;
          worst_layer = row.layer_index;
        }
      }
      total_leaked += map.leaked_relevance;
      max_leaked = std::max(max_leaked, map.leaked_relevance);
    }
    nlohmann::ordered_json j;
    j["samples"] = samples;
    j["seed"] = seed;
    j["worstResidual"] = worst;
    j["worstSample"] = worst_sample;
    j["worstLayer"] = worst_layer;
    j["totalLeaked"] = total_leaked;
    j["maxLeaked"] = max_leaked;
    print_text_or_json(json, j.dump(),
                       "samples " + std::to_string(samples) + " worst residual " + report::format_number(worst) +
                           " (sample " + std::to_string(worst_sample) + ", layer " + std::to_string(worst_layer) +
                           ") total leaked " + report::format_number(total_leaked));
    return 0;
  }
};

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polarized relevance maps and data-preparation diagnostics for image discriminators", "plrp"};
  app.require_subcommand(1);
  int exit_code = 0;

  ExplainCmd ex;
  auto* c_ex = app.add_subcommand("explain", "Relevance heatmap for one image");
  add_model_options(c_ex, ex.model, true);
  c_ex->add_option("--image", ex.image, "Input image (PNG/PGM/PPM)")->required();
  add_explain_options(c_ex, ex.explain);
  add_render_options(c_ex, ex.render);
  c_ex->add_option("--out", ex.out, "Heatmap PNG; the JSON sidecar goes next to it")->capture_default_str();
  c_ex->add_option("--raw-out", ex.raw_out, "Raw relevance container (<path>.json + <path>.bin)");
  c_ex->add_flag("--json", ex.json, "Print the sidecar on stdout");

  TrajectoryCmd tr;
  auto* c_tr = app.add_subcommand("trajectory", "Compare checkpoints <dir>/<iteration>/{model.json,weights.bin}");
  c_tr->add_option("dir", tr.dir, "Checkpoint directory")->required();
  c_tr->add_option("--image", tr.image, "Input image")->required();
  add_explain_options(c_tr, tr.explain);
  add_render_options(c_tr, tr.render);
  c_tr->add_option("--out", tr.out, "Output directory")->capture_default_str();
  c_tr->add_option("--bin-width", tr.bin_width, "Radial bin width in pixels")->capture_default_str();
  c_tr->add_flag("--json", tr.json, "Print a JSON summary");

  DiagnoseCmd dg;
  auto* c_dg = app.add_subcommand("diagnose-background", "Histograms of background regions and their divergence");
  c_dg->add_option("--image", dg.image, "Image to inspect")->required();
  c_dg->add_option("--region", dg.regions, "x,y,w,h (repeatable)")->required();
  c_dg->add_option("--out", dg.out, "Also write the JSON report here");
  c_dg->add_flag("--json", dg.json, "Print the JSON report");

  DetectCmd dt;
  auto* c_dt = app.add_subcommand("detect-boundary", "Look for a rectangular phantom boundary in relevance maps");
  c_dt->add_option("--map", dt.maps, "Raw relevance container from explain --raw-out (repeatable)");
  add_model_options(c_dt, dt.model, false);
  c_dt->add_option("--image", dt.images, "Image to explain with --model (repeatable)");
  add_explain_options(c_dt, dt.explain);
  c_dt->add_option("--threshold", dt.threshold, "Robust z threshold")->capture_default_str();
  c_dt->add_flag("--check", dt.check, "Exit 3 when a boundary is detected");
  c_dt->add_option("--out", dt.out, "Also write the JSON report here");
  c_dt->add_flag("--json", dt.json, "Print the JSON report");

  AugmentCmd ag;
  auto* c_ag = app.add_subcommand("augment", "Apply geometric augmentation with zero or noise padding");
  c_ag->add_option("--image", ag.image, "Input image")->required();
  c_ag->add_option("--op", ag.ops, "flipH | flipV | rotate:DEG | translate:DX,DY | scale:F (repeatable, in order)");
  c_ag->add_option("--pad", ag.pad, "zero|noise")->check(CLI::IsMember({"zero", "noise"}))->capture_default_str();
  c_ag->add_option("--noise-mu", ag.mu, "Noise mean")->capture_default_str();
  c_ag->add_option("--noise-sigma", ag.sigma, "Noise standard deviation")->capture_default_str();
  c_ag->add_option("--seed", ag.seed, "Noise seed")->capture_default_str();
  c_ag->add_option("--out", ag.out, "Output image")->capture_default_str();

  MetricsCmd mt;
  auto* c_mt = app.add_subcommand("metrics", "PSNR and SSIM between two images");
  c_mt->add_option("a", mt.a, "First image")->required();
  c_mt->add_option("b", mt.b, "Second image")->required();
  c_mt->add_flag("--json", mt.json, "Print JSON");

  VerifyCmd vf;
  auto* c_vf = app.add_subcommand("verify", "Check relevance conservation on seeded random inputs");
  add_model_options(c_vf, vf.model, true);
  add_explain_options(c_vf, vf.explain);
  c_vf->add_option("--samples", vf.samples, "Number of random inputs")->capture_default_str();
  c_vf->add_option("--seed", vf.seed, "Input seed")->capture_default_str();
  c_vf->add_flag("--json", vf.json, "Print JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what(), kExitUsage);
    return kExitUsage;
  }

  try {
    if (c_ex->parsed()) exit_code = ex.run();
    else if (c_tr->parsed()) exit_code = tr.run();
    else if (c_dg->parsed()) exit_code = dg.run();
    else if (c_dt->parsed()) exit_code = dt.run();
    else if (c_ag->parsed()) exit_code = ag.run();
    else if (c_mt->parsed()) exit_code = mt.run();
    else if (c_vf->parsed()) exit_code = vf.run();
  } catch (const UsageError& e) {
    report_error("usage", e.what(), kExitUsage);
    return kExitUsage;
  } catch (const Error& e) {
    report_error(to_string(e.kind()), e.what(), kExitData);
    return kExitData;
  } catch (const std::exception& e) {
    report_error("io", e.what(), kExitData);
    return kExitData;
  }
  return exit_code;
}
