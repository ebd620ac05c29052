#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "skd/dataset.hpp"
#include "skd/oracle.hpp"

#include "datagen.hpp"
#include "report.hpp"
#include "runner.hpp"
#include "workload.hpp"

namespace {

struct GenDataArgs {
  std::uint64_t n = 100000;
  std::uint32_t dims = 2;
  std::string dist = "uniform";
  std::uint64_t seed = 1;
  std::string out;
};

struct GenWorkloadArgs {
  std::string dataset;
  std::uint64_t n = 1000;  // number of queries
  double selectivity = 0.001;
  std::size_t k = 0;  // 0 = not a knn workload
  double insert_frac = 0;
  double delete_frac = 0;
  unsigned batches = 5;
  std::uint64_t seed = 1;
  std::string out;
};

int do_gen_data(const GenDataArgs& a) {
  skdbench::GenConfig cfg{a.n, a.dims, skdbench::parse_dist(a.dist), a.seed};
  skd::write_dataset(a.out, skdbench::gen_dataset(cfg));
  return 0;
}

int do_gen_workload(const GenWorkloadArgs& a) {
  skd::PointSet pts = skd::read_dataset(a.dataset);
  skd::FlatStore store(pts);

  skdbench::Workload w;
  w.dims = pts.dims();
  w.seed = a.seed;
  if (a.insert_frac > 0 || a.delete_frac > 0) {
    w.kind = skdbench::WorkloadKind::Mixed;
    w.insert_frac = a.insert_frac;
    w.delete_frac = a.delete_frac;
    w.batches = a.batches;
    w.target_selectivity = a.selectivity;
    w.ranges = skdbench::gen_range_workload(store, a.n, a.selectivity, a.seed);
  } else if (a.k > 0) {
    w.kind = skdbench::WorkloadKind::Knn;
    w.knns = skdbench::gen_knn_workload(store, a.n, a.k, a.seed);
  } else {
    w.kind = skdbench::WorkloadKind::Range;
    w.target_selectivity = a.selectivity;
    w.ranges = skdbench::gen_range_workload(store, a.n, a.selectivity, a.seed);
  }
  skdbench::write_workload(a.out, w);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slicing kd-tree benchmark driver"};
  app.require_subcommand(1);

  GenDataArgs gen_data;
  auto* gd = app.add_subcommand("gen-data", "generate a binary dataset file");
  gd->add_option("--n", gen_data.n, "number of points")
      ->check(CLI::Range(std::uint64_t{1}, std::uint64_t{1} << 32))
      ->capture_default_str();
  gd->add_option("--dims", gen_data.dims, "dimensions")
      ->check(CLI::Range(1u, 16u))
      ->capture_default_str();
  gd->add_option("--dist", gen_data.dist, "uniform | gaussian | dup-heavy")
      ->check(CLI::IsMember({"uniform", "gaussian", "dup-heavy"}))
      ->capture_default_str();
  gd->add_option("--seed", gen_data.seed, "rng seed")->capture_default_str();
  gd->add_option("--out", gen_data.out, "output dataset file")->required();

  GenWorkloadArgs gen_wl;
  auto* gw = app.add_subcommand("gen-workload", "generate a workload file for a dataset");
  gw->add_option("dataset", gen_wl.dataset, "binary dataset file")
      ->required()
      ->check(CLI::ExistingFile);
  gw->add_option("--n", gen_wl.n, "number of queries")
      ->check(CLI::Range(std::uint64_t{1}, std::uint64_t{10000000}))
      ->capture_default_str();
  gw->add_option("--selectivity", gen_wl.selectivity,
                 "target fraction of points per range query")
      ->check(CLI::Range(1e-12, 1.0))
      ->capture_default_str();
  gw->add_option("--k", gen_wl.k, "neighbors per query (makes a knn workload)")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
  gw->add_option("--insert-frac", gen_wl.insert_frac,
                 "inserted points as a fraction of n (makes a mixed workload)")
      ->check(CLI::Range(0.0, 1.0));
  gw->add_option("--delete-frac", gen_wl.delete_frac,
                 "deleted points as a fraction of n (makes a mixed workload)")
      ->check(CLI::Range(0.0, 1.0));
  gw->add_option("--batches", gen_wl.batches, "update batches in a mixed workload")
      ->check(CLI::Range(1u, 1000u))
      ->capture_default_str();
  gw->add_option("--seed", gen_wl.seed, "rng seed")->capture_default_str();
  gw->add_option("--out", gen_wl.out, "output workload file")->required();

  std::string ds_path, wl_path;
  std::uint32_t leaf_capacity = 128;
  std::string layouts = "auto", simd = "auto", format = "csv", out_path;
  std::uint64_t seed = 0x5eed;
  bool verify = false;

  auto add_tree_options = [&](CLI::App* c, bool with_verify) {
    c->add_option("--leaf-capacity", leaf_capacity, "max points per leaf")
        ->check(CLI::Range(2u, 1u << 20))
        ->capture_default_str();
    c->add_option("--layouts", layouts, "inner-node layouts: auto | n64-only")
        ->check(CLI::IsMember({"auto", "n64-only"}))
        ->capture_default_str();
    c->add_option("--simd", simd, "leaf-scan kernels: auto | scalar")
        ->check(CLI::IsMember({"auto", "scalar"}))
        ->capture_default_str();
    c->add_option("--seed", seed, "build rng seed")->capture_default_str();
    c->add_option("--format", format, "report format: csv | json")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    c->add_option("--out", out_path, "report file (default: stdout)");
    if (with_verify) {
      c->add_flag("--verify", verify, "check every query against the scan oracle");
    }
  };

  auto* bd = app.add_subcommand("build", "build an index and report its shape");
  bd->add_option("dataset", ds_path, "binary dataset file")
      ->required()
      ->check(CLI::ExistingFile);
  add_tree_options(bd, false);

  auto* bc = app.add_subcommand("bench", "run a workload and report timings");
  bc->add_option("dataset", ds_path, "binary dataset file")
      ->required()
      ->check(CLI::ExistingFile);
  bc->add_option("workload", wl_path, "workload file")
      ->required()
      ->check(CLI::ExistingFile);
  add_tree_options(bc, true);

  auto* vf = app.add_subcommand("verify", "run a workload checking every query, untimed");
  vf->add_option("dataset", ds_path, "binary dataset file")
      ->required()
      ->check(CLI::ExistingFile);
  vf->add_option("workload", wl_path, "workload file")
      ->required()
      ->check(CLI::ExistingFile);
  add_tree_options(vf, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gd->parsed()) return do_gen_data(gen_data);
    if (gw->parsed()) return do_gen_workload(gen_wl);

    skdbench::RunOptions opt;
    opt.leaf_capacity = leaf_capacity;
    opt.n64_only = layouts == "n64-only";
    opt.simd = simd == "scalar" ? skd::SimdMode::Scalar : skd::SimdMode::Auto;
    opt.verify = verify;
    opt.seed = seed;
    opt.format = skdbench::parse_format(format);
    opt.out = out_path;

    if (bd->parsed()) return skdbench::run_build(ds_path, opt);
    if (bc->parsed()) return skdbench::run_bench(ds_path, wl_path, opt);
    if (vf->parsed()) return skdbench::run_verify(ds_path, wl_path, opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
