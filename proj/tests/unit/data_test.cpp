#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <mmvae/data.hpp>
#include <mmvae/synthetic.hpp>

using namespace mmvae;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const ModalityLayout& L() { return ModalityLayout::standard(); }

std::size_t count_sentinels(const VectorXd& v) {
  return static_cast<std::size_t>((v.array() == kMuteValue).count());
}

VectorXd some_sample() {
  Rng r(1);
  return (r.gaussian_vector(28) * 0.4).cwiseMax(-1.0).cwiseMin(1.0);
}

}  // namespace

TEST(Mask, IdentityAndFull) {
  const VectorXd x = some_sample();
  EXPECT_EQ(apply_mask(x, MaskSpec::none(5), L()), x);
  EXPECT_TRUE((apply_mask(x, MaskSpec::all(5), L()).array() == -2.0).all());
}

TEST(Mask, TouchBothTimestepsMutesTwoEntries) {
  const auto m = L().index_of("touch");
  const VectorXd y = apply_mask(some_sample(), MaskSpec::modality(5, m), L());
  EXPECT_EQ(count_sentinels(y), 2u);
  EXPECT_EQ(y[16], -2.0);
  EXPECT_EQ(y[17], -2.0);
}

TEST(Mask, Idempotent) {
  const VectorXd x = some_sample();
  Rng r(2);
  for (int k = 0; k < 30; ++k) {
    MaskSpec m(5);
    for (std::size_t i = 0; i < 5; ++i)
      for (auto t : {Timestep::previous, Timestep::current}) m.set(i, t, r.uniform() < 0.5);
    const VectorXd once = apply_mask(x, m, L());
    EXPECT_EQ(apply_mask(once, m, L()), once);
    EXPECT_EQ(count_sentinels(once), m.muted_entries(L()));
    for (Eigen::Index i = 0; i < 28; ++i)
      if (once[i] != kMuteValue) {
        EXPECT_EQ(once[i], x[i]);
      }
  }
}

TEST(Normalize, AffineEndpoints) {
  const auto layout = ModalityLayout({{"a", 1}, {"b", 1}});
  MatrixXd raw(4, 3);
  raw << 0, 5, 10,
         7, -1, 3,
         1, 2, 3,
         -4, 0, 4;
  const auto ds = normalize(raw, layout);
  EXPECT_EQ(ds.targets.row(0), Eigen::RowVector3d(-1, 0, 1));
  EXPECT_EQ(ds.targets.row(1), Eigen::RowVector3d(1, -1, 0));
  EXPECT_EQ(ds.targets.row(3), Eigen::RowVector3d(-1, 0, 1));
}

TEST(Normalize, RoundTrip) {
  Rng r(3);
  const MatrixXd raw = r.gaussian_matrix(28, 50) * 7.0;
  const auto ds = normalize(raw, L());
  EXPECT_LT((denormalize(ds) - raw).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(ds.targets.maxCoeff(), 1.0);
  EXPECT_GE(ds.targets.minCoeff(), -1.0);
}

TEST(Normalize, ConstantColumnNamed) {
  Rng r(4);
  MatrixXd raw = r.gaussian_matrix(28, 10);
  raw.row(18).setConstant(1.0);
  try {
    normalize(raw, L());
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("sound_tm1_0"), std::string::npos);
  }
}

TEST(Augment, OneSampleGivesFourPairs) {
  const auto ds = normalize(MatrixXd::Random(28, 2), L()).subset({0});
  Rng r(5);
  const auto b = augment(ds, 0, r);
  EXPECT_EQ(b.size(), 4u);
  std::set<AugmentationKind> kinds(b.kinds.begin(), b.kinds.end());
  EXPECT_EQ(kinds.size(), 4u);
}

TEST(Augment, MaskedEntryCounts) {
  const auto ds = generate_synthetic(1, 150);
  Rng r(6);
  const auto b = augment(ds, 3, r);
  const auto vision = L().index_of("vision");
  bool saw_vision_single = false;
  for (std::size_t j = 0; j < b.size(); ++j) {
    const auto col = b.inputs.col(static_cast<Eigen::Index>(j));
    const auto muted = count_sentinels(col);
    switch (b.kinds[j]) {
      case AugmentationKind::original: EXPECT_EQ(muted, 0u); break;
      case AugmentationKind::current_muted:
        EXPECT_EQ(muted, 14u);
        for (std::size_t m = 0; m < 5; ++m)
          for (auto i : L().indices(m, Timestep::current))
            EXPECT_EQ(col[static_cast<Eigen::Index>(i)], kMuteValue);
        break;
      case AugmentationKind::modality_muted:
        EXPECT_EQ(muted, 2 * L().dim(b.modality[j]));
        break;
      case AugmentationKind::single_previous_only:
        EXPECT_EQ(muted, 28 - L().dim(b.modality[j]));
        if (b.modality[j] == vision) {
          EXPECT_EQ(muted, 24u);
          saw_vision_single = true;
        }
        break;
    }
    // Input equals target outside masked positions.
    for (Eigen::Index i = 0; i < 28; ++i)
      if (col[i] != kMuteValue) {
        EXPECT_EQ(col[i], b.targets(i, static_cast<Eigen::Index>(j)));
      }
  }
  EXPECT_TRUE(saw_vision_single);
}

TEST(Augment, TargetsAreFullyObserved) {
  const auto ds = generate_synthetic(2, 150);
  Rng r(7);
  const auto b = augment(ds, 0, r);
  EXPECT_EQ((b.targets.array() == kMuteValue).count(), 0);
  EXPECT_EQ(b.targets.cols(), 600);
}

TEST(Augment, CoverageAcrossEpochCycle) {
  // Every sample sees every modality in both round-robin types over 5
  // consecutive epochs, and every (type, modality) appears within each epoch.
  const auto ds = generate_synthetic(3, 150);
  Rng r(8);
  std::vector<std::set<std::pair<int, std::size_t>>> per_sample(ds.size());
  for (std::int64_t e = 0; e < 5; ++e) {
    const auto b = augment(ds, e, r);
    std::set<std::pair<int, std::size_t>> epoch_combos;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (b.kinds[j] == AugmentationKind::original ||
          b.kinds[j] == AugmentationKind::current_muted)
        continue;
      const std::pair<int, std::size_t> key{static_cast<int>(b.kinds[j]), b.modality[j]};
      per_sample[b.sample_index[j]].insert(key);
      epoch_combos.insert(key);
    }
    EXPECT_EQ(epoch_combos.size(), 10u);
  }
  for (const auto& s : per_sample) EXPECT_EQ(s.size(), 10u);
}

TEST(Augment, DeterministicGivenRng) {
  const auto ds = generate_synthetic(4, 150);
  Rng a(9), b(9);
  EXPECT_EQ(augment(ds, 2, a).inputs, augment(ds, 2, b).inputs);
}

TEST(Csv, RoundTripIsExact) {
  const MatrixXd raw = generate_synthetic_raw(5, 30, {});
  std::stringstream ss;
  write_dataset_csv(ss, raw, L());
  EXPECT_EQ(read_dataset_csv(ss, L()), raw);
}

TEST(Csv, RejectsMalformedInput) {
  const MatrixXd raw = generate_synthetic_raw(5, 3, {});
  std::stringstream good;
  write_dataset_csv(good, raw, L());
  const std::string text = good.str();

  std::stringstream missing(text.substr(0, text.rfind(',')) + "\n");
  EXPECT_THROW(read_dataset_csv(missing, L()), IngestionError);

  std::string bad_value = text;
  bad_value.replace(bad_value.find('\n') + 1, 1, "x");
  std::stringstream bv(bad_value);
  EXPECT_THROW(read_dataset_csv(bv, L()), IngestionError);

  std::stringstream header("a,b,c\n1,2,3\n");
  EXPECT_THROW(read_dataset_csv(header, L()), IngestionError);

  std::stringstream empty_field(text.substr(0, text.find('\n') + 1) + ",1\n");
  EXPECT_THROW(read_dataset_csv(empty_field, L()), IngestionError);

  std::stringstream nothing("");
  EXPECT_THROW(read_dataset_csv(nothing, L()), IngestionError);
}

TEST(Csv, Fixture) {
  const auto ds = load_dataset_csv(std::string(MMVAE_TEST_DATA_DIR) + "/sensor_log.csv");
  EXPECT_EQ(ds.targets.rows(), 28);
  EXPECT_GE(ds.size(), 20u);
  EXPECT_LE(ds.targets.maxCoeff(), 1.0);
  EXPECT_GE(ds.targets.minCoeff(), -1.0);
  EXPECT_THROW(load_dataset_csv("/nonexistent/file.csv"), IngestionError);
}

TEST(Synthetic, Deterministic) {
  EXPECT_EQ(generate_synthetic_raw(11, 200, {}), generate_synthetic_raw(11, 200, {}));
  EXPECT_NE(generate_synthetic_raw(11, 200, {}), generate_synthetic_raw(12, 200, {}));
}

TEST(Synthetic, NoiselessJointIntegratesMotor) {
  SyntheticParams p;
  p.noise = 0.0;
  const MatrixXd raw = generate_synthetic_raw(13, 500, p);
  for (Eigen::Index j = 0; j < raw.cols(); ++j)
    for (std::size_t d = 0; d < 4; ++d) {
      const double jt = raw(static_cast<Eigen::Index>(L().index(0, Timestep::current, d)), j);
      const double jp = raw(static_cast<Eigen::Index>(L().index(0, Timestep::previous, d)), j);
      const double mp = raw(static_cast<Eigen::Index>(L().index(4, Timestep::previous, d)), j);
      ASSERT_NEAR(jt - jp, mp * p.dt, 1e-12);
    }
}

TEST(Synthetic, BinaryModalities) {
  const MatrixXd raw = generate_synthetic_raw(14, 2000, {});
  for (auto name : {"touch", "sound"}) {
    std::set<double> values;
    for (auto i : L().indices(L().index_of(name)))
      for (Eigen::Index j = 0; j < raw.cols(); ++j)
        values.insert(raw(static_cast<Eigen::Index>(i), j));
    EXPECT_EQ(values, (std::set<double>{-1.0, 1.0})) << name;
  }
}

TEST(Synthetic, NormalizedHasNoSentinel) {
  const auto ds = generate_synthetic(15, 1000);
  EXPECT_GE(ds.targets.minCoeff(), -1.0);
  EXPECT_EQ((ds.targets.array() == kMuteValue).count(), 0);
}

TEST(Synthetic, VisionPredictsNextJointLinearly) {
  const auto ds = generate_synthetic(16, 4000);
  const auto vision = L().indices(L().index_of("vision"), Timestep::previous);
  const auto joint = L().indices(L().index_of("joint"), Timestep::current);
  MatrixXd a(ds.targets.cols(), static_cast<Eigen::Index>(vision.size()) + 1);
  for (std::size_t c = 0; c < vision.size(); ++c)
    a.col(static_cast<Eigen::Index>(c)) =
        ds.targets.row(static_cast<Eigen::Index>(vision[c])).transpose();
  a.col(a.cols() - 1).setOnes();
  for (auto i : joint) {
    const VectorXd y = ds.targets.row(static_cast<Eigen::Index>(i)).transpose();
    const VectorXd coef = a.colPivHouseholderQr().solve(y);
    const double ss_res = (y - a * coef).squaredNorm();
    const double ss_tot = (y.array() - y.mean()).square().sum();
    EXPECT_GT(1.0 - ss_res / ss_tot, 0.9) << L().column_name(i);
  }
}
