#include <doctest.h>

#include <cmath>
#include <fstream>

#include "mgnet/errors.hpp"
#include "mgnet/volume_io.hpp"
#include "properties.hpp"
#include "temp_dir.hpp"

using namespace mgnet;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("manifest round trip resolves paths against its directory") {
    TempDir dir;
    std::filesystem::create_directories(dir / "vols");
    save_volume(Tensor::full({1, 2, 3, 4}, 1.0f), dir / "vols/a.vol");
    save_volume(Tensor::full({1, 2, 3, 4}, 2.0f), dir / "vols/b.vol");
    write_file(dir / "m.csv",
               "subject_id,scan_id,label,path\n"
               "s1,t0,0,vols/a.vol\n"
               "s2,t0,1,vols/b.vol\n");
    const Manifest m = read_manifest(dir / "m.csv");
    REQUIRE(m.records.size() == 2);
    CHECK(m.records[1].label == 1);
    CHECK(m.records[0].volume_path == dir / "vols/a.vol");
    CHECK(m.geometry == Shape{1, 2, 3, 4});

    write_manifest(m, dir / "copy.csv");
    const Manifest again = read_manifest(dir / "copy.csv");
    CHECK(again.records[1].volume_path == m.records[1].volume_path);
    std::ifstream is(dir / "copy.csv");
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    CHECK(header == "subject_id,scan_id,label,path");
    CHECK(row == "s1,t0,0,vols/a.vol");
  }

  TEST_CASE("malformed manifests") {
    TempDir dir;
    save_volume(Tensor::full({1, 2, 2, 2}, 1.0f), dir / "a.vol");
    save_volume(Tensor::full({1, 3, 2, 2}, 1.0f), dir / "b.vol");
    write_file(dir / "header.csv", "id,label\n");
    CHECK_THROWS_AS(read_manifest(dir / "header.csv"), FormatError);
    write_file(dir / "label.csv", "subject_id,scan_id,label,path\ns1,t,2,a.vol\n");
    CHECK_THROWS_AS(read_manifest(dir / "label.csv"), FormatError);
    write_file(dir / "dup.csv", "subject_id,scan_id,label,path\ns1,t,0,a.vol\ns1,t,0,a.vol\n");
    CHECK_THROWS_AS(read_manifest(dir / "dup.csv"), FormatError);
    write_file(dir / "mixed.csv", "subject_id,scan_id,label,path\ns1,t,0,a.vol\ns1,u,1,a.vol\n");
    CHECK_THROWS_AS(read_manifest(dir / "mixed.csv"), FormatError);
    write_file(dir / "geom.csv", "subject_id,scan_id,label,path\ns1,t,0,a.vol\ns2,t,1,b.vol\n");
    CHECK_THROWS_AS(read_manifest(dir / "geom.csv"), DataError);
    CHECK_NOTHROW(read_manifest(dir / "geom.csv", false));
    CHECK_THROWS_AS(read_manifest(dir / "missing.csv"), IoError);
  }

  TEST_CASE("stratified group folds: no leakage, balanced classes") {
    Rng rng(61);
    for (int trial = 0; trial < 40; ++trial) {
      const Manifest m = props::random_manifest(rng);
      const auto labels = m.subject_labels();
      std::size_t smallest = SIZE_MAX;
      for (int label = 0; label < 2; ++label) {
        std::size_t n = 0;
        for (const auto& [s, l] : labels) n += l == label;
        smallest = std::min(smallest, n);
      }
      const std::size_t k = 2 + rng.below(std::min<std::size_t>(smallest, 10) - 1);
      const FoldAssignment f = stratified_group_kfold(m, k, rng.next());
      const props::FoldCheck c = props::check_folds(m, f);
      CHECK(c.every_subject_once);
      CHECK(c.no_leak);
      CHECK(c.worst_class_imbalance <= 1);
    }
  }

  TEST_CASE("fold assignment is seeded and ignores record order") {
    Rng rng(62);
    Manifest m = props::random_manifest(rng);
    const FoldAssignment a = stratified_group_kfold(m, 3, 9);
    std::reverse(m.records.begin(), m.records.end());
    CHECK(stratified_group_kfold(m, 3, 9).fold_of == a.fold_of);
    bool any_differs = false;
    for (std::uint64_t seed = 10; seed < 15; ++seed) {
      any_differs |= stratified_group_kfold(m, 3, seed).fold_of != a.fold_of;
    }
    CHECK(any_differs);
    CHECK_THROWS_AS(stratified_group_kfold(m, 1, 0), ArgumentError);
    CHECK_THROWS_AS(stratified_group_kfold(m, 1000, 0), ArgumentError);
  }

  TEST_CASE("folds file round trip") {
    TempDir dir;
    Rng rng(63);
    const Manifest m = props::random_manifest(rng);
    const FoldAssignment f = stratified_group_kfold(m, 3, 1);
    write_folds(f, dir / "folds.csv");
    const FoldAssignment g = read_folds(dir / "folds.csv");
    CHECK(g.k == 3);
    CHECK(g.fold_of == f.fold_of);
    write_file(dir / "bad.csv", "subject_id,fold\ns1,x\n");
    CHECK_THROWS_AS(read_folds(dir / "bad.csv"), FormatError);
    write_file(dir / "twice.csv", "subject_id,fold\ns1,0\ns1,1\n");
    CHECK_THROWS_AS(read_folds(dir / "twice.csv"), FormatError);
  }

  TEST_CASE("synthetic region geometry") {
    const SynthRegion r = synth_region({1, 16, 16, 16});
    CHECK(r.cz == 7.5);
    CHECK(r.radius == 4.0);
    CHECK(r.contains(7, 8, 8));
    CHECK_FALSE(r.contains(0, 0, 0));
  }

  TEST_CASE("synthetic class 1 is darker inside the region") {
    TempDir dir;
    SynthSpec spec;
    spec.subjects_per_class = 3;
    spec.scans_per_subject = 2;
    spec.geometry = {1, 12, 12, 12};
    spec.effect_size = 1.0;
    spec.noise_std = 0.1;
    spec.seed = 4;
    const Manifest m = synth_generate(spec, dir.path());
    CHECK(m.records.size() == 12);
    CHECK(std::filesystem::exists(dir / "manifest.csv"));
    CHECK(read_manifest(dir / "manifest.csv").records.size() == 12);

    const SynthRegion region = synth_region(spec.geometry);
    double inside[2] = {0, 0}, outside[2] = {0, 0};
    std::size_t n_in = 0, n_out = 0;
    for (const VolumeRecord& r : m.records) {
      const Tensor v = load_volume(r.volume_path);
      for (std::size_t z = 0; z < 12; ++z)
        for (std::size_t y = 0; y < 12; ++y)
          for (std::size_t x = 0; x < 12; ++x) {
            const double value = v.data()[(z * 12 + y) * 12 + x];
            if (region.contains(z, y, x)) {
              inside[r.label] += value;
              if (r.label == 0) ++n_in;
            } else {
              outside[r.label] += value;
              if (r.label == 0) ++n_out;
            }
          }
    }
    const double drop_inside = (inside[0] - inside[1]) / static_cast<double>(n_in);
    const double drop_outside = (outside[0] - outside[1]) / static_cast<double>(n_out);
    CHECK(drop_inside == doctest::Approx(1.0).epsilon(0.1));
    CHECK(std::abs(drop_outside) < 0.2);

    TempDir again;
    const Manifest m2 = synth_generate(spec, again.path());
    CHECK(bitwise_equal(load_volume(m.records[5].volume_path),
                        load_volume(m2.records[5].volume_path)));
  }
}
