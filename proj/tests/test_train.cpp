#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "test_util.hpp"
#include "wsd/eval.hpp"
#include "wsd/gradcheck.hpp"
#include "wsd/train.hpp"

using namespace wsd;

namespace {

Corpus fixture() {
  return load_corpus({testutil::data_path("fixture/train.xml"), "", testutil::data_path("fixture/test.xml"),
                      testutil::data_path("fixture/test.key")});
}

HyperParams small_hp() {
  HyperParams hp;
  hp.embedding_size = 10;
  hp.hidden_size = 6;
  hp.left_context = hp.right_context = 6;
  hp.max_epochs = 4;
  hp.patience = 4;
  hp.batch_size = 8;
  hp.validation_fraction = 0.2;
  hp.seed = 3;
  return hp;
}

TrainedModel train_fixture(const HyperParams& hp, std::size_t threads = 1, Ablation a = Ablation::standard) {
  TrainOptions opts;
  opts.threads = threads;
  return train_model(fixture(), configure(a, hp), testutil::data_path("fixture/vectors.txt"), opts);
}

}  // namespace

TEST(GradCheck, PassesInEveryModeAcrossSeeds) {
  for (ArchMode m : {ArchMode::standard, ArchMode::reversed_directions, ArchMode::shuffled_context,
                     ArchMode::fc_instead_of_blstm}) {
    for (std::uint64_t seed : {1, 2, 3, 7, 11}) {
      GradCheckConfig cfg;
      cfg.mode = m;
      cfg.seed = seed;
      cfg.with_dropout = seed % 2 == 1;
      const GradCheckReport r = grad_check(cfg);
      EXPECT_TRUE(r.passed) << to_string(m) << " seed " << seed;
      for (const auto& g : r.groups) {
        EXPECT_GT(g.entries, 0u) << g.name;
        EXPECT_LT(g.max_rel_error, 1e-4) << g.name;
      }
      EXPECT_EQ(r.groups.size(), 6u);
    }
  }
}

TEST(GradCheck, CoversEveryParameter) {
  GradCheckConfig cfg;
  const GradCheckReport r = grad_check(cfg);
  const std::size_t d = cfg.embedding_size, H = cfg.hidden_size, L = cfg.left_context, R = cfg.right_context;
  std::map<std::string, std::size_t> n;
  for (const auto& g : r.groups) n[g.name] = g.entries;
  EXPECT_EQ(n["sense_table"], 3 * d);
  EXPECT_EQ(n["word_table"], (L + R) * d);
  EXPECT_EQ(n["left_lstm"], 4 * H * (1 + H + 1));
  EXPECT_EQ(n["right_lstm"], 4 * H * (1 + H + 1));
  EXPECT_EQ(n["hidden_layer"], H * 2 * H + H);
  EXPECT_EQ(n["output_layer"], H + 1);
}

TEST(GradCheck, DetectsTamperedGradients) {
  const GradCheckConfig cfg;
  const auto failing = [&](const std::function<void(Gradients&)>& f) { return grad_check(cfg, f).failing_groups(); };
  EXPECT_EQ(failing([](Gradients& g) { g.head.output_bias += 1e-3; }), std::vector<std::string>{"output_layer"});
  EXPECT_EQ(failing([](Gradients& g) { g.left.recurrent_weights(3, 1) *= 1.01; }), std::vector<std::string>{"left_lstm"});
  EXPECT_EQ(failing([](Gradients& g) { g.words.begin()->second[0] *= -1.0; }), std::vector<std::string>{"word_table"});
  EXPECT_EQ(failing([](Gradients& g) { g.senses.clear(); }), std::vector<std::string>{"sense_table"});
}

TEST(GradCheck, ExtendedPrecisionScoreAgrees) {
  for (ArchMode m : {ArchMode::standard, ArchMode::reversed_directions, ArchMode::fc_instead_of_blstm}) {
    GradCheckConfig cfg;
    cfg.mode = m;
    const GradCheckProblem pb = make_gradcheck_problem(cfg);
    EXPECT_NEAR(double(detail::ext_score(pb.params, pb.sense, pb.window, pb.masks)),
                score_sense(pb.params, pb.sense, pb.window, &pb.masks), 1e-12);
    EXPECT_NEAR(double(pb.precise_loss()), pb.loss(), 1e-12);
  }
  EXPECT_DOUBLE_EQ(gradient_relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(gradient_relative_error(1e-9, 0.0), 0.1);
  EXPECT_DOUBLE_EQ(gradient_relative_error(2.0, 1.0), 0.5);
}

TEST(Backward, DroppedUnitsGetNoGradient) {
  GradCheckConfig cfg;
  GradCheckProblem pb = make_gradcheck_problem(cfg);
  std::fill(pb.masks.hidden.begin(), pb.masks.hidden.end(), 0.0);
  pb.masks.hidden[0] = 1.0 / 0.7;
  ForwardTrace tr;
  score_sense(pb.params, pb.sense, pb.window, &pb.masks, &tr);
  const Gradients g = backward(pb.params, pb.target, tr);
  for (std::size_t j = 1; j < g.head.output_weights.size(); ++j) EXPECT_EQ(g.head.output_weights[j], 0.0);
  for (std::size_t j = 1; j < g.head.hidden_bias.size(); ++j) EXPECT_EQ(g.head.hidden_bias[j], 0.0);
  EXPECT_EQ(g.words.count(kPadId), 0u);
}

TEST(Dropout, MaskShapesAndScaling) {
  Rng rng(30);
  HyperParams hp;
  const DropoutMasks m = sample_dropout_masks(100, 15, 15, 100, 50, hp, rng);
  EXPECT_EQ(m.sense.size(), 100u);
  EXPECT_EQ(m.left_words.size(), 15u);
  EXPECT_EQ(m.right_words.size(), 15u);
  EXPECT_EQ(m.encoding.size(), 100u);
  EXPECT_EQ(m.hidden.size(), 50u);
  for (double x : m.sense) EXPECT_TRUE(x == 0.0 || x == 1.0 / 0.8);
  for (double x : m.encoding) EXPECT_TRUE(x == 0.0 || x == 2.0);

  hp.dropout_embedding = hp.dropout_lstm_output = hp.dropout_fc = 0.0;
  const DropoutMasks none = sample_dropout_masks(100, 15, 15, 100, 50, hp, rng);
  EXPECT_TRUE(none.sense.empty() && none.left_words.empty() && none.encoding.empty() && none.hidden.empty());
}

TEST(Dropout, MasksKeepTheExpectedShare) {
  Rng rng(31);
  const Vector m = bernoulli_mask(rng, 200000, 0.5);
  double mean = 0.0;
  for (double x : m) mean += x;
  EXPECT_NEAR(mean / double(m.size()), 1.0, 0.01);
}

TEST(WordDropout, ReplacesWithPadAtTheConfiguredRate) {
  Rng rng(32);
  ContextWindow w{std::vector<WordId>(5000, 7), std::vector<WordId>(5000, 9)};
  w.left[0] = kPadId;
  const ContextWindow d = apply_word_dropout(w, 0.2, rng);
  std::size_t dropped = 0;
  for (std::size_t k = 1; k < 5000; ++k) dropped += d.left[k] == kPadId;
  for (std::size_t k = 0; k < 5000; ++k) {
    dropped += d.right[k] == kPadId;
    EXPECT_TRUE(d.right[k] == 9 || d.right[k] == kPadId);
  }
  EXPECT_NEAR(double(dropped) / 9999.0, 0.2, 0.015);
  EXPECT_EQ(apply_word_dropout(w, 0.0, rng), w);
}

TEST(Examples, OnePositivePerGoldAndNegativesOtherwise) {
  const Corpus c = fixture();
  const Vocabulary v = build_vocab(c.train);
  const HyperParams hp = small_hp();
  for (const Instance& inst : c.train) {
    const auto ex = generate_examples(inst, c.inventory, v, hp);
    const auto cands = c.inventory.candidates(inst.lexelt);
    ASSERT_EQ(ex.size(), cands.size());
    std::size_t positives = 0;
    for (std::size_t k = 0; k < ex.size(); ++k) {
      EXPECT_EQ(ex[k].sense, cands[k]);
      EXPECT_EQ(ex[k].window, make_window(inst, v, 6, 6));
      positives += ex[k].target == 1.0;
    }
    EXPECT_EQ(positives, inst.gold.size()) << inst.id;
  }
  EXPECT_EQ(mse_loss(0.25, 1.0), 0.5625);
  EXPECT_EQ(mse_grad(0.25, 1.0), -1.5);
}

TEST(RmsProp, ConstantGradientMatchesClosedForm) {
  const NetworkParams z = zero_network(3, 2, 4, 2, {ArchMode::standard, 2, 2, 0});
  NetworkParams p = z;
  HyperParams hp;
  hp.learning_rate = 0.01;
  OptimizerState st = OptimizerState::init(p);
  Gradients g = Gradients::zeros_like(p);
  const double gv = 0.3;
  g.head.output_bias = gv;
  g.left.bias[2] = -gv;
  double w = 0.0;
  for (int n = 1; n <= 20; ++n) {
    rmsprop_step(p, g, st, hp);
    const double acc = (1.0 - std::pow(0.9, n)) * gv * gv;
    w -= 0.01 * gv / (std::sqrt(acc) + 1e-8);
    EXPECT_NEAR(p.head.output_bias, w, 1e-14);
    EXPECT_NEAR(p.left.bias[2], -w, 1e-14);
    EXPECT_NEAR(st.dense.head.output_bias, acc, 1e-16);
  }
  EXPECT_EQ(p.left.bias[0], 0.0);
  EXPECT_EQ(p.head.hidden_weights, z.head.hidden_weights);
}

TEST(RmsProp, LazyEmbeddingDecayEqualsDenseDecay) {
  Rng rng(33);
  NetworkParams p = oracle::random_network(rng, 4, 2, 3, 2, {ArchMode::standard, 2, 2, 0});
  HyperParams hp;
  hp.learning_rate = 0.05;
  OptimizerState st = OptimizerState::init(p);
  // Dense reference for word column 2 and sense column 1.
  Vector w(p.words.column(2).begin(), p.words.column(2).end()), wa(3, 0.0);
  Vector s(p.senses.column(1).begin(), p.senses.column(1).end()), sa(3, 0.0);
  const Vector pad(p.words.column(0).begin(), p.words.column(0).end());
  for (int step = 1; step <= 12; ++step) {
    Gradients g = Gradients::zeros_like(p);
    Vector gw(3, 0.0), gs(3, 0.0);
    if (step % 4 == 1) gw = testutil::random_vector(rng, 3);
    if (step % 3 == 0) gs = testutil::random_vector(rng, 3);
    if (step % 4 == 1) g.words[2] = gw;
    if (step % 3 == 0) g.senses[1] = gs;
    g.words[kPadId] = Vector(3, 1.0);
    rmsprop_step(p, g, st, hp);
    for (auto [par, acc, grad] : {std::tuple{&w, &wa, &gw}, std::tuple{&s, &sa, &gs}})
      for (std::size_t k = 0; k < 3; ++k) {
        (*acc)[k] = 0.9 * (*acc)[k] + 0.1 * (*grad)[k] * (*grad)[k];
        (*par)[k] -= 0.05 * (*grad)[k] / (std::sqrt((*acc)[k]) + 1e-8);
      }
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_NEAR(p.words.column(2)[k], w[k], 1e-14);
      EXPECT_NEAR(p.senses.column(1)[k], s[k], 1e-14);
      EXPECT_NEAR(st.table_accumulator(TableKind::word, 2, k, 0.9), wa[k], 1e-15);
      EXPECT_NEAR(st.table_accumulator(TableKind::sense, 1, k, 0.9), sa[k], 1e-15);
    }
  }
  EXPECT_EQ(Vector(p.words.column(0).begin(), p.words.column(0).end()), pad);
}

TEST(HyperParams, ValidationRejectsBadValues) {
  EXPECT_NO_THROW(HyperParams{}.validate());
  const auto bad = [](auto mutate) {
    HyperParams hp;
    mutate(hp);
    EXPECT_THROW(hp.validate(), ConfigError);
  };
  bad([](HyperParams& h) { h.dropout_fc = 1.0; });
  bad([](HyperParams& h) { h.word_dropout = -0.1; });
  bad([](HyperParams& h) { h.left_context = 0; });
  bad([](HyperParams& h) { h.hidden_size = 0; });
  bad([](HyperParams& h) { h.batch_size = 0; });
  bad([](HyperParams& h) { h.learning_rate = 0.0; });
  bad([](HyperParams& h) { h.rms_decay = 1.0; });
  bad([](HyperParams& h) { h.validation_fraction = 0.0; });
  bad([](HyperParams& h) { h.dropout_embedding = std::nan(""); });
}

TEST(Training, SameSeedGivesIdenticalParameters) {
  const HyperParams hp = small_hp();
  const TrainedModel a = train_fixture(hp);
  const TrainedModel b = train_fixture(hp);
  EXPECT_EQ(a.model.params, b.model.params);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t k = 0; k < a.log.size(); ++k)
    EXPECT_EQ(format_epoch_record(a.log[k]), format_epoch_record(b.log[k]));
  HyperParams other = hp;
  other.seed = 4;
  EXPECT_NE(train_fixture(other).model.params, a.model.params);
}

TEST(Training, ThreadCountDoesNotChangeTheResult) {
  HyperParams hp = small_hp();
  for (Ablation a : {Ablation::standard, Ablation::fc}) {
    const TrainedModel one = train_fixture(hp, 1, a);
    const TrainedModel four = train_fixture(hp, 4, a);
    EXPECT_EQ(one.model.params, four.model.params) << to_string(a);
    EXPECT_EQ(one.best_epoch, four.best_epoch);
  }
}

TEST(Training, KeepsTheBestEpochParameters) {
  const Corpus c = fixture();
  HyperParams hp = small_hp();
  hp.max_epochs = 6;
  hp.patience = 6;
  std::vector<NetworkParams> snapshots;
  std::vector<EpochRecord> records;
  TrainOptions opts;
  opts.inspect = [&](const EpochRecord& r, const NetworkParams& p) {
    records.push_back(r);
    snapshots.push_back(p);
  };
  const TrainedModel t = train_model(c, configure(Ablation::standard, hp), testutil::data_path("fixture/vectors.txt"), opts);
  ASSERT_EQ(snapshots.size(), t.log.size());
  ASSERT_GE(t.best_epoch, 1u);
  EXPECT_EQ(t.model.params, snapshots[t.best_epoch - 1]);
  const EpochRecord& best = records[t.best_epoch - 1];
  for (const auto& r : records) {
    EXPECT_TRUE(r.val_f < best.val_f || (r.val_f == best.val_f && r.val_loss >= best.val_loss));
    EXPECT_EQ(r.elapsed_seconds, 0.0);
    EXPECT_TRUE(std::isfinite(r.mean_loss));
  }
}

TEST(Training, PatienceStopsEarly) {
  HyperParams hp = small_hp();
  hp.patience = 0;
  hp.max_epochs = 10;
  EXPECT_EQ(train_fixture(hp).log.size(), 1u);
  hp.patience = 2;
  const TrainedModel t = train_fixture(hp);
  EXPECT_LE(t.log.size(), t.best_epoch + 2);
}

TEST(Training, LossFallsWithoutDropout) {
  HyperParams hp = small_hp();
  hp.dropout_embedding = hp.dropout_lstm_output = hp.dropout_fc = hp.word_dropout = 0.0;
  hp.learning_rate = 1e-2;
  hp.max_epochs = hp.patience = 15;
  const TrainedModel t = train_fixture(hp);
  ASSERT_GE(t.log.size(), 10u);
  EXPECT_LT(t.log.back().mean_loss, 0.8 * t.log.front().mean_loss);
}

TEST(Training, RejectsBadInputs) {
  Corpus c = fixture();
  const HyperParams hp = small_hp();
  const Vocabulary v = build_vocab(c.train);
  Rng rng(34);
  NetworkParams p = init_network(init_random_word_table(v, 10, rng), init_sense_table(c.inventory, 10, rng), 6,
                                 {ArchMode::standard, 6, 6, 0}, rng);
  EXPECT_THROW(train(p, {}, {}, v, c.inventory, hp), ConfigError);
  HyperParams broken = hp;
  broken.batch_size = 0;
  EXPECT_THROW(train(p, c.train, {}, v, c.inventory, broken), ConfigError);

  for (double& x : p.words.column(v.id(c.train[0].left.back()))) x = std::nan("");
  EXPECT_THROW(train(p, c.train, {}, v, c.inventory, hp), NumericalError);

  EXPECT_THROW(train_model(c, configure(Ablation::standard, hp), ""), ConfigError);
}

TEST(Training, NoGloveVariantNeedsNoVectors) {
  HyperParams hp = small_hp();
  hp.max_epochs = 1;
  const TrainedModel t = train_model(fixture(), configure(Ablation::no_glove, hp), "");
  EXPECT_EQ(t.glove.found, 0u);
  EXPECT_EQ(t.log.size(), 1u);
  for (std::size_t c = 1; c < t.model.params.words.width(); ++c)
    for (double x : t.model.params.words.column(c)) EXPECT_LT(std::abs(x), 1.0);
}
