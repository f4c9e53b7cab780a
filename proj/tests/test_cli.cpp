#include <gtest/gtest.h>
#include <httplib.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "topomap/render.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "topomap");
  std::ostringstream out, err;
  const int code = topomap::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string data(const std::string& name) { return (fs::path(TOPOMAP_TEST_DATA_DIR) / name).string(); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  TempDir() : path(fs::temp_directory_path() / ("topomap_cli_" + std::to_string(::getpid()) + "_" + std::to_string(n++))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  fs::path path;
  static inline int n = 0;
};

std::vector<std::string> csv_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

}  // namespace

TEST(Cli, RenderMatchesGolden) {
  TempDir tmp;
  auto r = cli({"render", data("square.json"), "--width", "160", "-o", tmp.file("a.png")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(tmp.file("a.png")), read_file(fs::path(TOPOMAP_GOLDEN_DIR) / "square.png"));
  auto again = cli({"--workers", "3", "render", data("square.json"), "--width", "160", "-o", tmp.file("b.png")});
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(read_file(tmp.file("a.png")), read_file(tmp.file("b.png")));
}

TEST(Cli, RenderErrors) {
  TempDir tmp;
  EXPECT_EQ(cli({"render", data("missing.json"), "-o", tmp.file("x.png")}).code, 2);
  EXPECT_EQ(cli({"render", data("square.json"), "-o", tmp.file("x.png"), "--kernel", "box"}).code, 2);
  EXPECT_EQ(cli({"render", data("square.json"), "-o", tmp.file("x.png"), "--bandwidth", "abc"}).code, 2);
  EXPECT_EQ(cli({"render", data("square.json"), "-o", tmp.file("x.png"), "--width", "0"}).code, 2);
  EXPECT_EQ(cli({"render", data("square.json"), "-o", "/nonexistent/dir/x.png"}).code, 3);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(Cli, RenderWritesGrid) {
  TempDir tmp;
  auto r = cli({"render", data("square.json"), "--width", "40", "--height", "30", "-o", tmp.file("m.png"), "--grid",
                tmp.file("g.tdm")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto g = topomap::field::decode_tdm1(read_file(tmp.file("g.tdm")));
  EXPECT_EQ(g.width, 40u);
  EXPECT_EQ(g.height, 30u);
}

TEST(Cli, SweepTwoByFive) {
  TempDir tmp;
  auto r = cli({"sweep", data("square.json"), "--width", "64", "-o", tmp.file("s.png")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto img = topomap::render::decode_png(read_file(tmp.file("s.png")));
  EXPECT_EQ(img.width(), 64u * 5);
  const auto lines = csv_lines(r.out);
  ASSERT_EQ(lines.size(), 11u);
  EXPECT_EQ(lines[0], "kernel,bandwidth,mean_density");
  auto one = cli({"sweep", data("square.json"), "--width", "64", "--kernels", "gaussian", "--bandwidths", "300", "-o",
                  tmp.file("one.png")});
  ASSERT_EQ(one.code, 0);
  EXPECT_EQ(topomap::render::decode_png(read_file(tmp.file("one.png"))).width(), 64u);
  EXPECT_EQ(cli({"sweep", data("square.json"), "--kernels", "", "-o", tmp.file("e.png")}).code, 2);
  EXPECT_EQ(cli({"sweep", data("square.json"), "--bandwidths", "-1", "-o", tmp.file("e.png")}).code, 2);
}

TEST(Cli, BenchCsvShape) {
  auto r = cli({"bench", "--sizes", "1x1,4x3", "--pois", "10,50", "--repeats", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = csv_lines(r.out);
  ASSERT_EQ(lines.size(), 1u + 2 * 2 * 2);
  EXPECT_EQ(lines[0], "method,width,height,pois,ms");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::istringstream row(lines[i]);
    std::string method, w, h, n, ms;
    std::getline(row, method, ',');
    std::getline(row, w, ',');
    std::getline(row, h, ',');
    std::getline(row, n, ',');
    std::getline(row, ms, ',');
    EXPECT_TRUE(method == "topology" || method == "planar");
    EXPECT_GT(std::stod(ms), 0.0);
  }
  EXPECT_EQ(cli({"bench", "--sizes", "12"}).code, 2);
  EXPECT_EQ(cli({"bench", "--methods", "voronoi"}).code, 2);
}

TEST(Cli, QueryAtIntersection) {
  auto r = cli({"query", data("square.json"), "--x", "300", "--y", "300"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json q = json::parse(r.out);
  EXPECT_EQ(q["via"], 2);
  EXPECT_EQ(q["dominant"], 1);
  EXPECT_EQ(cli({"query", data("square.json"), "--x", "1"}).code, 2);
}

TEST(Cli, IngestValidate) {
  TempDir tmp;
  std::ofstream(tmp.file("bad.json")) << R"({"nodes": [{"id": "a", "x": 0, "y": 0}], "ways": [{"id": "w", "nodes": ["a", "b"], "default_speed": 30}]})";
  auto bad = cli({"ingest", "--input", tmp.file("bad.json"), "--validate"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("dangling_reference"), std::string::npos) << bad.err;
  auto ok = cli({"ingest", "-i", data("square.json"), "-o", tmp.file("norm.json")});
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(ok.out.find("intersections 4"), std::string::npos);
  EXPECT_EQ(cli({"ingest", "-i", tmp.file("norm.json"), "--validate"}).code, 0);
}

TEST(Cli, ServeAnswersScenarios) {
  int pipefd[2];
  ASSERT_EQ(::pipe(pipefd), 0);
  const pid_t pid = ::fork();
  ASSERT_GE(pid, 0);
  if (pid == 0) {
    ::dup2(pipefd[1], STDOUT_FILENO);
    ::close(pipefd[0]);
    ::execl(TOPOMAP_CLI_PATH, "topomap", "serve", "--port", "0", "--dataset", data("square.json").c_str(),
            static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(pipefd[1]);
  FILE* f = ::fdopen(pipefd[0], "r");
  int port = -1;
  char line[512];
  while (port < 0 && std::fgets(line, sizeof line, f)) {
    std::string s(line);
    if (auto p = s.rfind(':'); s.rfind("listening on", 0) == 0 && p != std::string::npos) port = std::stoi(s.substr(p + 1));
  }
  ASSERT_GT(port, 0);
  httplib::Client c("127.0.0.1", port);
  auto r = c.Get("/scenarios");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body).size(), 1u);
  ::kill(pid, SIGTERM);
  int status = 0;
  ::waitpid(pid, &status, 0);
  std::fclose(f);
  EXPECT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
}
