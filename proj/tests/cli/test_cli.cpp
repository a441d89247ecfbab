#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "radar_mrf/io.hpp"
#include "radar_mrf/synth.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace radar_mrf;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() / "radar_mrf_cli_io";
  fs::create_directories(dir);
  const fs::path out = dir / ("out" + std::to_string(counter));
  const fs::path err = dir / ("err" + std::to_string(counter++));
  const std::string cmd = env + " '" RADAR_MRF_CLI "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Three synthetic VoD scenes plus labels under `dir`.
fs::path make_scenes(const std::string& name, int count = 3) {
  const fs::path dir = testing::temp_dir(name);
  const Run r = cli("synth -o " + q(dir / "scenes") + " -n " + std::to_string(count) + " --seed 5");
  REQUIRE(r.code == 0);
  return dir;
}

}  // namespace

TEST_CASE("help exits zero on every subcommand") {
  CHECK(cli("--help").code == 0);
  for (const char* sub : {"encode", "kde-heatmap", "assign", "eval", "synth", "bench"}) {
    CAPTURE(sub);
    const Run r = cli(std::string(sub) + " --help");
    CHECK(r.code == 0);
    CHECK(r.out.find("--config") != std::string::npos);
  }
}

TEST_CASE("argument errors exit with the configuration code") {
  CHECK(cli("").code == 3);
  CHECK(cli("frobnicate").code == 3);
  CHECK(cli("encode --bogus x").code == 3);
}

TEST_CASE("synth writes scans and labels") {
  const fs::path dir = make_scenes("cli_synth");
  for (const char* f : {"000000.bin", "000000.schema.json", "000002.bin", "labels.jsonl"}) {
    CHECK(fs::exists(dir / "scenes" / f));
  }
  std::ifstream in(dir / "scenes" / "labels.jsonl");
  const auto boxes = parse_boxes(in, std::vector<std::string>{"Car", "Pedestrian", "Cyclist"}, false);
  CHECK_FALSE(boxes.empty());
  const auto pc = load_scan(dir / "scenes" / "000001");
  CHECK(pc.schema().size() == 7);
}

TEST_CASE("encode writes every artifact with consistent sizes") {
  const fs::path dir = make_scenes("cli_encode");
  const Run r = cli("encode " + q(dir / "scenes") + " -o " + q(dir / "enc"));
  REQUIRE(r.code == 0);
  for (int i = 0; i < 3; ++i) {
    char stem[8];
    std::snprintf(stem, sizeof stem, "%06d", i);
    const fs::path base = dir / "enc" / stem;
    for (const char* suffix : {".pillars.bin", ".pillars.meta.json", ".voxels.bin", ".density.bin", ".density.json"}) {
      REQUIRE(fs::exists(base.string() + suffix));
    }
    const json meta = json::parse(slurp(base.string() + ".pillars.meta.json"));
    const std::size_t d = meta["D"], p = meta["P"], n = meta["N"];
    CHECK(fs::file_size(base.string() + ".pillars.bin") == 4 * d * p * n);
    CHECK(meta["H"] == 320);
    CHECK(meta["W"] == 320);
    CHECK(meta["coords"].size() == p);
    CHECK(d == 13);  // 7 fields + 6 offsets

    const json dens = json::parse(slurp(base.string() + ".density.json"));
    const std::size_t np = dens["N"], b = dens["B"];
    CHECK(b == 2);
    CHECK(np == meta["points"].get<std::size_t>());
    CHECK(fs::file_size(base.string() + ".density.bin") == 4 * np * b);

    const std::string vox = slurp(base.string() + ".voxels.bin");
    REQUIRE(vox.size() >= 4);
    std::uint32_t hl = 0;
    for (int k = 3; k >= 0; --k) hl = (hl << 8) | static_cast<unsigned char>(vox[static_cast<std::size_t>(k)]);
    const json header = json::parse(vox.substr(4, hl));
    CHECK(header["dims"] == json::array({21, 320, 320}));
    const std::size_t v = header["voxels"], vb = header["bands"];
    CHECK(vox.size() == 4 + hl + v * (12 + 4 * vb + 4));
  }
}

TEST_CASE("encode is byte-for-byte deterministic") {
  const fs::path dir = make_scenes("cli_determinism", 2);
  REQUIRE(cli("encode " + q(dir / "scenes") + " -o " + q(dir / "a")).code == 0);
  REQUIRE(cli("encode " + q(dir / "scenes") + " -o " + q(dir / "b"), "RADAR_MRF_THREADS=1").code == 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    CAPTURE(e.path());
    CHECK(slurp(e.path()) == slurp(dir / "b" / e.path().filename()));
    ++files;
  }
  CHECK(files == 10);
}

TEST_CASE("bandwidth override reaches the density header") {
  const fs::path dir = make_scenes("cli_bandwidths", 1);
  REQUIRE(cli("encode " + q(dir / "scenes") + " -o " + q(dir / "enc") + " --bandwidths 0.6,1.0").code == 0);
  const json dens = json::parse(slurp(dir / "enc" / "000000.density.json"));
  CHECK(dens["B"] == 2);
  CHECK(dens["radii"] == json::array({0.6, 1.0}));
}

TEST_CASE("config precedence is flag over file over profile") {
  const fs::path dir = make_scenes("cli_precedence", 1);
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"pillar":{"max_points":16},"seed":3})";
  }
  REQUIRE(cli("encode " + q(dir / "scenes") + " -o " + q(dir / "p")).code == 0);
  REQUIRE(cli("encode " + q(dir / "scenes") + " -o " + q(dir / "f") + " -c " + q(dir / "cfg.json")).code == 0);
  REQUIRE(cli("encode " + q(dir / "scenes") + " -o " + q(dir / "x") + " -c " + q(dir / "cfg.json") + " --max-points 8")
              .code == 0);
  REQUIRE(cli("encode " + q(dir / "scenes") + " -o " + q(dir / "s") + " -c " + q(dir / "cfg.json") +
              " --set pillar.max_points=4")
              .code == 0);
  auto n_of = [&](const char* sub) { return json::parse(slurp(dir / sub / "000000.pillars.meta.json"))["N"]; };
  CHECK(n_of("p") == 32);
  CHECK(n_of("f") == 16);
  CHECK(n_of("x") == 8);
  CHECK(n_of("s") == 4);
  CHECK(json::parse(slurp(dir / "f" / "000000.pillars.meta.json"))["seed"] == 3);
}

TEST_CASE("schema mismatch exits 2 naming the field") {
  const fs::path dir = testing::temp_dir("cli_schema");
  // x, y, z, v_r only: the VoD kernel needs v_rc.
  save_pointcloud(dir / "scan", testing::random_cloud(50, 10.0, 1));
  const Run r = cli("encode " + q(dir / "scan.bin") + " -o " + q(dir / "enc"));
  CHECK(r.code == 2);
  CHECK(r.err.find("v_rc") != std::string::npos);
  CHECK(cli("kde-heatmap " + q(dir / "scan.bin") + " -o " + q(dir / "h")).code == 2);
}

TEST_CASE("unreadable or malformed input exits 2") {
  const fs::path dir = testing::temp_dir("cli_format");
  CHECK(cli("encode " + q(dir / "missing.bin") + " -o " + q(dir)).code == 2);
  {
    std::ofstream bad(dir / "bad.bin", std::ios::binary);
    bad << "abc";  // not a multiple of 4 * channels
  }
  CHECK(cli("encode " + q(dir / "bad.bin") + " -o " + q(dir)).code == 2);
  {
    std::ofstream labels(dir / "labels.jsonl");
    labels << R"({"frame":"0","class":"Car","x":0,"y":0,"z":0,"w":1,"l":1,"h":1,"theta":0})" << "\n{oops\n";
  }
  const Run r = cli("eval " + q(dir / "labels.jsonl") + " " + q(dir / "labels.jsonl"));
  CHECK(r.code == 2);
  CHECK(r.err.find("line 2") != std::string::npos);
}

TEST_CASE("configuration errors exit 3") {
  const fs::path dir = make_scenes("cli_config", 1);
  const std::string enc = "encode " + q(dir / "scenes") + " -o " + q(dir / "enc");
  CHECK(cli(enc + " --profile kitti").code == 3);
  CHECK(cli(enc + " --bandwidths -1").code == 3);
  CHECK(cli(enc + " --bandwidths 1,x").code == 3);
  CHECK(cli(enc + " --reduce median").code == 3);
  CHECK(cli(enc + " --set pillar.bogus=1").code == 3);
  CHECK(cli(enc, "RADAR_MRF_THREADS=zero").code == 3);
  CHECK(cli(enc, "RADAR_MRF_THREADS=0").code == 3);
  CHECK(cli(enc, "RADAR_MRF_THREADS=4").code == 0);
  {
    std::ofstream cfg(dir / "typo.json");
    cfg << R"({"bandwith":[1.0]})";
  }
  CHECK(cli(enc + " -c " + q(dir / "typo.json")).code == 3);
  CHECK(cli(enc + " -c " + q(dir / "nope.json")).code == 3);
}

TEST_CASE("eval prints a table and JSON") {
  const fs::path dir = make_scenes("cli_eval");
  const fs::path labels = dir / "scenes" / "labels.jsonl";
  SUBCASE("labels as detections score one everywhere") {
    const Run r = cli("eval " + q(labels) + " " + q(labels) + " -o " + q(dir / "report.json"));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("entire") != std::string::npos);
    const json rep = json::parse(slurp(dir / "report.json"));
    bool any = false;
    for (const auto& region : rep["regions"]) {
      for (const auto& c : region["classes"]) {
        if (c["ap_3d"].is_null()) continue;
        CHECK(c["ap_3d"].get<double>() == 1.0);
        CHECK(c["ap_bev"].get<double>() == 1.0);
        any = true;
      }
    }
    CHECK(any);
  }
  SUBCASE("empty detections score zero") {
    { std::ofstream(dir / "empty.jsonl"); }
    const Run r = cli("eval " + q(dir / "empty.jsonl") + " " + q(labels) + " --json");
    REQUIRE(r.code == 0);
    const json rep = json::parse(r.out);
    for (const auto& region : rep["regions"]) {
      for (const auto& c : region["classes"]) {
        if (!c["ap_3d"].is_null()) CHECK(c["ap_3d"].get<double>() == 0.0);
      }
    }
  }
  SUBCASE("corridor without bounds is a configuration error") {
    const Run r = cli("eval " + q(labels) + " " + q(labels) + " --region corridor");
    CHECK(r.code == 3);
    CHECK(r.err.find("corridor") != std::string::npos);
  }
  SUBCASE("corridor bounds from a config file") {
    {
      std::ofstream cfg(dir / "corridor.json");
      cfg << R"({"eval":{"regions":{"corridor":{"x_min":0,"x_max":25,"y_min":-4,"y_max":4,"z_min":-3,"z_max":2}}}})";
    }
    const Run r = cli("eval " + q(labels) + " " + q(labels) + " --region corridor --json -c " + q(dir / "corridor.json"));
    CHECK(r.code == 0);
    const json rep = json::parse(r.out);
    CHECK(rep["regions"].size() == 1);
    CHECK(rep["regions"].contains("corridor"));
  }
  SUBCASE("unknown region") { CHECK(cli("eval " + q(labels) + " " + q(labels) + " --region moon").code == 3); }
}

TEST_CASE("kde-heatmap writes PGM and CSV") {
  const fs::path dir = testing::temp_dir("cli_heatmap");
  SUBCASE("empty scan is uniform mid-gray") {
    save_pointcloud(dir / "empty", PointCloud(FeatureSchema::vod(), {}));
    REQUIRE(cli("kde-heatmap " + q(dir / "empty.bin") + " -o " + q(dir / "e")).code == 0);
    std::istringstream pgm(slurp(dir / "e.pgm"));
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    pgm >> magic >> w >> h >> maxv;
    CHECK(magic == "P2");
    CHECK(w == 320);
    CHECK(h == 320);
    CHECK(maxv == 255);
    int v = 0, count = 0;
    bool uniform = true;
    while (pgm >> v) {
      uniform = uniform && v == 128;
      ++count;
    }
    CHECK(count == 320 * 320);
    CHECK(uniform);
  }
  SUBCASE("dense cluster cells are brighter than the clutter median") {
    const auto cfg_roi = Roi3D{0.0, 51.2, -25.6, 25.6, -3.0, 2.0};
    SceneSpec spec;
    spec.roi = cfg_roi;
    spec.schema = FeatureSchema::vod();
    spec.seed = 4;
    spec.clutter = {300, 300};
    ObjectSpec car;
    car.points = {120, 120};
    spec.objects.push_back(car);
    const Scene sc = gen_scene(spec);
    save_pointcloud(dir / "cluster", sc.cloud);
    REQUIRE(cli("kde-heatmap " + q(dir / "cluster.bin") + " -o " + q(dir / "c") + " --resolution 64x64").code == 0);
    // CSV cells of cluster points vs clutter points.
    std::vector<std::vector<double>> grid;
    std::istringstream csv(slurp(dir / "c.csv"));
    std::string line;
    while (std::getline(csv, line)) {
      std::vector<double> row;
      std::stringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
      grid.push_back(row);
    }
    REQUIRE(grid.size() == 64);
    REQUIRE(grid[0].size() == 64);
    auto cell_of = [&](std::size_t i) {
      const auto c = static_cast<std::size_t>((sc.cloud.x(i) - cfg_roi.x_min) / (51.2 / 64));
      const auto r = static_cast<std::size_t>((sc.cloud.y(i) - cfg_roi.y_min) / (51.2 / 64));
      return grid[std::min<std::size_t>(r, 63)][std::min<std::size_t>(c, 63)];
    };
    std::vector<double> cluster, clutter;
    for (std::size_t i = 0; i < sc.cloud.size(); ++i) {
      if (!cfg_roi.contains(sc.cloud.x(i), sc.cloud.y(i), sc.cloud.z(i))) continue;
      (sc.provenance[i] >= 0 ? cluster : clutter).push_back(cell_of(i));
    }
    REQUIRE_FALSE(clutter.empty());
    std::nth_element(clutter.begin(), clutter.begin() + static_cast<std::ptrdiff_t>(clutter.size() / 2), clutter.end());
    const double median = clutter[clutter.size() / 2];
    for (double v : cluster) CHECK(v > median);
  }
}

TEST_CASE("assign emits one JSON line per frame") {
  const fs::path dir = make_scenes("cli_assign");
  const Run r = cli("assign " + q(dir / "scenes" / "labels.jsonl") + " --grid 40x40");
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> frames;
  while (std::getline(lines, line)) {
    const json j = json::parse(line);
    frames.push_back(j["frame"]);
    CHECK(j["num_anchors"] == 40 * 40 * 3 * 2);
    CHECK(j["n_pos"].get<std::size_t>() == j["positives"].size());
  }
  CHECK(frames == std::vector<std::string>{"000000", "000001", "000002"});
  CHECK(cli("assign " + q(dir / "scenes" / "labels.jsonl") + " --iou sphere").code == 3);
}

TEST_CASE("bench reports three stages") {
  const fs::path dir = make_scenes("cli_bench", 1);
  const Run r = cli("bench " + q(dir / "scenes") + " -r 1 --warmup 0");
  REQUIRE(r.code == 0);
  const json rep = json::parse(r.out);
  for (const char* stage : {"kde", "pillarize", "voxelize"}) {
    CAPTURE(stage);
    CHECK(rep["stages"][stage]["median_ms"].get<double>() >= 0.0);
    CHECK(rep["stages"][stage]["p95_ms"].get<double>() >= rep["stages"][stage]["median_ms"].get<double>());
  }
  CHECK(rep["repetitions"] == 1);
  CHECK(cli("bench " + q(dir / "scenes") + " -r 0").code == 3);
  CHECK(cli("bench").code == 2);
}
