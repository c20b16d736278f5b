#include "g2p/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <thread>
#include <utility>

#include "g2p/image_io.hpp"

namespace g2p {

namespace {

constexpr std::uint64_t kInitStream = 0x1A17;
constexpr std::uint64_t kOrderStream = 0x0DE5;

double mean_sq_offset(const Tensor& t, float target) {
  double s = 0.0;
  for (float v : t.values()) s += (static_cast<double>(v) - target) * (static_cast<double>(v) - target);
  return s / static_cast<double>(t.size());
}

void scale_outputs(std::vector<ScaleOutput>& outs, float s) {
  for (auto& o : outs) {
    o.patch *= s;
    for (auto& f : o.features) f *= s;
  }
}

void fill_noise(std::span<float> dst, Rng& rng) {
  for (float& v : dst) v = static_cast<float>(rng.uniform(-1.0, 1.0));
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  if (epochs < 1 && max_steps < 1) throw std::invalid_argument("train config: need epochs or max_steps");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be > 0");
  if (p_random_target < 0.0 || p_random_target > 1.0) {
    throw std::invalid_argument("train config: p_random_target must lie in [0, 1]");
  }
  if (lambda_fm < 0.0 || lambda_l1 < 0.0) throw std::invalid_argument("train config: loss weights must be >= 0");
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
    throw std::invalid_argument("train config: holdout_fraction must lie in [0, 1)");
  }
  generator.validate();
  discriminator.validate();
  if (generator.family_size != discriminator.family_size) {
    throw std::invalid_argument("train config: generator and discriminator family sizes differ");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"max_steps", c.max_steps},
                     {"batch_size", c.batch_size},
                     {"lr", c.lr},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"lambda_fm", c.lambda_fm},
                     {"lambda_l1", c.lambda_l1},
                     {"p_random_target", c.p_random_target},
                     {"seed", c.seed},
                     {"ablation_random_adjacency", c.ablation_random_adjacency},
                     {"holdout_fraction", c.holdout_fraction},
                     {"checkpoint_every", c.checkpoint_every},
                     {"generator", c.generator},
                     {"discriminator", c.discriminator}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.lambda_fm = j.value("lambda_fm", c.lambda_fm);
  c.lambda_l1 = j.value("lambda_l1", c.lambda_l1);
  c.p_random_target = j.value("p_random_target", c.p_random_target);
  c.seed = j.value("seed", c.seed);
  c.ablation_random_adjacency = j.value("ablation_random_adjacency", c.ablation_random_adjacency);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  if (j.contains("generator")) j.at("generator").get_to(c.generator);
  if (j.contains("discriminator")) j.at("discriminator").get_to(c.discriminator);
}

// ---------------------------------------------------------------------------
// Data

int num_workers_from_env() {
  const char* env = std::getenv("G2P_NUM_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  const int n = std::atoi(env);
  return std::clamp(n, 1, 64);
}

Corpus Corpus::load(const std::filesystem::path& manifest, int image_size, int workers) {
  Corpus corpus{ingest_manifest(manifest), {}};
  const std::vector<FamilyTemplate> families = eligible_families(corpus.graph);

  std::vector<std::string> ids;
  for (const auto& f : families) ids.insert(ids.end(), f.slot_ids.begin(), f.slot_ids.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  // Each worker decodes a strided subset into fixed slots, so the result does
  // not depend on the worker count.
  std::vector<Tensor> decoded(ids.size());
  std::vector<std::string> errors(ids.size());
  const int n_workers = std::max(1, workers > 0 ? workers : num_workers_from_env());
  auto work = [&](int w) {
    for (std::size_t i = static_cast<std::size_t>(w); i < ids.size(); i += static_cast<std::size_t>(n_workers)) {
      try {
        decoded[i] = load_image_tensor(corpus.graph.image_path(ids[i]), image_size);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  if (n_workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work, w);
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!errors[i].empty()) throw std::runtime_error("image load failed for node '" + ids[i] + "': " + errors[i]);
  }
  std::map<std::string, const Tensor*> by_id;
  for (std::size_t i = 0; i < ids.size(); ++i) by_id[ids[i]] = &decoded[i];

  for (const FamilyTemplate& f : families) {
    std::vector<Tensor> slots;
    for (const std::string& id : f.slot_ids) slots.push_back(*by_id.at(id));
    corpus.families.push_back({f, stack(slots), build_adjacency(corpus.graph, f)});
  }
  return corpus;
}

Split split_families(int n, double holdout_fraction) {
  Split s;
  int held = static_cast<int>(std::lround(n * holdout_fraction));
  if (holdout_fraction > 0.0 && n >= 2) held = std::clamp(held, 1, n - 1);
  held = std::clamp(held, 0, n);
  for (int i = 0; i < n - held; ++i) s.train.push_back(i);
  for (int i = n - held; i < n; ++i) s.heldout.push_back(i);
  return s;
}

NormalizedAdjacency ablation_adjacency(const NormalizedAdjacency& lineage, Rng& rng) {
  if (lineage.size < 2) return lineage;  // a single node has only the self-loop
  for (;;) {
    NormalizedAdjacency adj = random_adjacency(lineage.size, rng);
    if (adj.a_tilde != lineage.a_tilde) return adj;
  }
}

FamilySample make_sample(const FamilyData& family, Rng& rng, const TrainConfig& cfg) {
  const int n = family.images.dim(0);
  FamilySample s;
  s.target_index = 0;
  if (n > 1 && rng.uniform() < cfg.p_random_target) s.target_index = 1 + static_cast<int>(rng.below(n - 1));
  s.images = family.images;
  const auto clean = family.images.slice(s.target_index);
  const auto& shape = family.images.shape();
  s.target_original = Tensor({shape[1], shape[2], shape[3]});
  std::copy(clean.begin(), clean.end(), s.target_original.data());
  fill_noise(s.images.slice(s.target_index), rng);
  s.adjacency = cfg.ablation_random_adjacency ? ablation_adjacency(family.lineage_adjacency, rng)
                                              : family.lineage_adjacency;
  return s;
}

FamilySample make_child_sample(const FamilyData& family, Rng& rng, bool random_adjacency) {
  TrainConfig cfg;
  cfg.p_random_target = 0.0;
  cfg.ablation_random_adjacency = random_adjacency;
  return make_sample(family, rng, cfg);
}

// ---------------------------------------------------------------------------
// Losses

GanLosses gan_losses(const std::vector<ScaleOutput>& real, const std::vector<ScaleOutput>& fake,
                     double lambda_fm) {
  if (real.size() != fake.size()) throw ShapeError("gan_losses: scale count mismatch");
  GanLosses l;
  double fm = 0.0;
  for (std::size_t s = 0; s < real.size(); ++s) {
    l.loss_d += 0.5 * (mean_sq_offset(real[s].patch, 1.0f) + mean_sq_offset(fake[s].patch, 0.0f));
    l.loss_g_adv += mean_sq_offset(fake[s].patch, 1.0f);
    for (std::size_t k = 0; k < real[s].features.size(); ++k) {
      const Tensor& a = real[s].features[k];
      const Tensor& b = fake[s].features[k];
      double sum = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) sum += std::fabs(static_cast<double>(a[i]) - b[i]);
      fm += sum / static_cast<double>(a.size());
    }
  }
  l.loss_g_fm = lambda_fm * fm;
  return l;
}

std::vector<ScaleOutput> d_loss_grad(const std::vector<ScaleOutput>& outputs, bool real) {
  std::vector<ScaleOutput> grads(outputs.size());
  for (std::size_t s = 0; s < outputs.size(); ++s) {
    const Tensor& p = outputs[s].patch;
    Tensor g(p.shape());
    const float target = real ? 1.0f : 0.0f;
    const auto inv_n = 1.0f / static_cast<float>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) g[i] = (p[i] - target) * inv_n;
    grads[s].patch = std::move(g);
  }
  return grads;
}

std::vector<ScaleOutput> g_loss_grad(const std::vector<ScaleOutput>& real,
                                     const std::vector<ScaleOutput>& fake, double lambda_fm) {
  std::vector<ScaleOutput> grads(fake.size());
  for (std::size_t s = 0; s < fake.size(); ++s) {
    const Tensor& p = fake[s].patch;
    Tensor g(p.shape());
    const auto inv_n = 1.0f / static_cast<float>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) g[i] = 2.0f * (p[i] - 1.0f) * inv_n;
    grads[s].patch = std::move(g);
    for (std::size_t k = 0; k < fake[s].features.size(); ++k) {
      const Tensor& a = real[s].features[k];
      const Tensor& b = fake[s].features[k];
      Tensor d(b.shape());
      const auto w = static_cast<float>(lambda_fm / static_cast<double>(b.size()));
      for (std::size_t i = 0; i < b.size(); ++i) {
        d[i] = b[i] > a[i] ? w : (b[i] < a[i] ? -w : 0.0f);
      }
      grads[s].features.push_back(std::move(d));
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(const std::vector<const nn::Param*>& params, double lr, double beta1, double beta2)
    : lr_(lr), beta1_(beta1), beta2_(beta2) {
  for (const nn::Param* p : params) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step(const std::vector<nn::Param*>& params, const nn::Grads& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const auto b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  const auto step = static_cast<float>(lr_ / c1);
  const auto inv_c2 = static_cast<float>(1.0 / c2);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& w = params[k]->value;
    const Tensor& g = grads[*params[k]];
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      w[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + static_cast<float>(kEps));
    }
  }
}

void Adam::save(BinaryWriter& w) const {
  w.f64(lr_);
  w.f64(beta1_);
  w.f64(beta2_);
  w.i64(t_);
  w.u64(m_.size());
  for (std::size_t k = 0; k < m_.size(); ++k) {
    w.tensor(m_[k]);
    w.tensor(v_[k]);
  }
}

void Adam::load(BinaryReader& r) {
  lr_ = r.f64();
  beta1_ = r.f64();
  beta2_ = r.f64();
  t_ = r.i64();
  const std::uint64_t n = r.u64();
  if (n != m_.size()) throw FormatError("optimizer state does not match the model");
  for (std::size_t k = 0; k < n; ++k) {
    Tensor m = r.tensor();
    Tensor v = r.tensor();
    if (!m.same_shape(m_[k]) || !v.same_shape(v_[k])) throw FormatError("optimizer moment shape mismatch");
    m_[k] = std::move(m);
    v_[k] = std::move(v);
  }
}

// ---------------------------------------------------------------------------
// State

nlohmann::ordered_json StepMetrics::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["epoch"] = epoch;
  j["loss_D"] = loss_d;
  j["loss_G_adv"] = loss_g_adv;
  j["loss_G_fm"] = loss_g_fm;
  j["loss_G_l1"] = loss_g_l1;
  return j;
}

TrainState TrainState::fresh(const TrainConfig& cfg) {
  cfg.validate();
  TrainState s;
  s.config = cfg;
  s.generator = Generator(cfg.generator);
  s.discriminator = MultiScaleDiscriminator(cfg.discriminator);
  Rng init(derive_seed(cfg.seed, kInitStream));
  s.generator.init(init);
  s.discriminator.init(init);
  s.opt_g = Adam(std::as_const(s.generator).params(), cfg.lr, cfg.beta1, cfg.beta2);
  s.opt_d = Adam(std::as_const(s.discriminator).params(), cfg.lr, cfg.beta1, cfg.beta2);
  s.order_rng = Rng(derive_seed(cfg.seed, kOrderStream));
  return s;
}

void TrainState::save(const std::filesystem::path& path) const {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    BinaryWriter w(out);
    w.raw(kCheckpointTag, std::strlen(kCheckpointTag));
    w.str(nlohmann::json(config).dump());
    w.i64(step);
    w.i64(epoch);
    w.u64(cursor);
    w.u64(order.size());
    for (int i : order) w.i64(i);
    w.str(order_rng.state());
    w.params(generator.params());
    w.params(discriminator.params());
    opt_g.save(w);
    opt_d.save(w);
  }
  std::filesystem::rename(tmp, path);
}

TrainState TrainState::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  BinaryReader r(in);
  std::string tag(std::strlen(kCheckpointTag), '\0');
  try {
    r.raw(tag.data(), tag.size());
  } catch (const FormatError&) {
    throw FormatError(path.string() + ": not a checkpoint");
  }
  if (tag != kCheckpointTag) throw FormatError(path.string() + ": not a " + kCheckpointTag + " checkpoint");
  try {
    TrainState s = fresh(nlohmann::json::parse(r.str()).get<TrainConfig>());
    s.step = r.i64();
    s.epoch = static_cast<int>(r.i64());
    s.cursor = r.u64();
    const std::uint64_t n = r.u64();
    if (n > (1u << 24)) throw FormatError("corrupt data order");
    s.order.clear();
    for (std::uint64_t i = 0; i < n; ++i) s.order.push_back(static_cast<int>(r.i64()));
    s.order_rng.set_state(r.str());
    r.params(s.generator.params());
    r.params(s.discriminator.params());
    s.opt_g.load(r);
    s.opt_d.load(r);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad config snapshot: " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(TrainState state, std::vector<const FamilyData*> training_set)
    : state_(std::move(state)), data_(std::move(training_set)) {
  if (data_.empty()) throw std::invalid_argument("no eligible families to train on");
  const int n = state_.config.generator.family_size;
  for (const FamilyData* f : data_) {
    if (f->images.dim(0) != n || f->images.dim(2) != state_.config.generator.image_size) {
      throw ShapeError("family " + f->family.child() + " does not match the model's family size or resolution");
    }
  }
}

std::int64_t Trainer::total_steps() const {
  const auto per_epoch = static_cast<std::int64_t>(
      (data_.size() + static_cast<std::size_t>(state_.config.batch_size) - 1) / state_.config.batch_size);
  const std::int64_t by_epochs = state_.config.epochs > 0 ? per_epoch * state_.config.epochs : INT64_MAX;
  return state_.config.max_steps > 0 ? std::min(by_epochs, state_.config.max_steps) : by_epochs;
}

bool Trainer::done() const { return state_.step >= total_steps(); }

std::vector<int> Trainer::next_batch() {
  if (state_.cursor >= state_.order.size()) {
    if (!state_.order.empty()) ++state_.epoch;
    state_.order.resize(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) state_.order[i] = static_cast<int>(i);
    for (std::size_t i = data_.size(); i > 1; --i) {
      std::swap(state_.order[i - 1], state_.order[state_.order_rng.below(i)]);
    }
    state_.cursor = 0;
  }
  const std::size_t end = std::min(state_.order.size(), state_.cursor + static_cast<std::size_t>(state_.config.batch_size));
  std::vector<int> batch(state_.order.begin() + static_cast<long>(state_.cursor), state_.order.begin() + static_cast<long>(end));
  state_.cursor = end;
  return batch;
}

Trainer::Batch Trainer::prepare_batch() {
  const TrainConfig& cfg = state_.config;
  const std::vector<int> order = next_batch();
  Batch batch;
  batch.tapes.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(state_.step), i));
    batch.samples.push_back(make_sample(*data_[order[i]], rng, cfg));
    const FamilySample& s = batch.samples.back();
    batch.fakes.push_back(state_.generator.generate(s.images, s.adjacency, s.target_index, &batch.tapes[i]));
  }
  return batch;
}

// Real candidate is the clean target, fake is G(x); both share the noised conditioning.
void Trainer::discriminator_step(const Batch& batch, StepMetrics& m) {
  const auto b = static_cast<double>(batch.samples.size());
  const auto inv_b = static_cast<float>(1.0 / b);
  nn::Grads grads(state_.discriminator.params());
  for (std::size_t i = 0; i < batch.samples.size(); ++i) {
    const FamilySample& s = batch.samples[i];
    MultiScaleDiscriminator::Tape tr, tf;
    const auto real = state_.discriminator.discriminate(s.images, s.target_original, &tr);
    const auto fake = state_.discriminator.discriminate(s.images, batch.fakes[i], &tf);
    m.loss_d += gan_losses(real, fake, 0.0).loss_d / b;
    auto dr = d_loss_grad(real, true);
    auto df = d_loss_grad(fake, false);
    scale_outputs(dr, inv_b);
    scale_outputs(df, inv_b);
    state_.discriminator.backward(tr, dr, &grads, false);
    state_.discriminator.backward(tf, df, &grads, false);
  }
  state_.opt_d.step(state_.discriminator.params(), grads);
}

void Trainer::generator_step(const Batch& batch, StepMetrics& m) {
  const TrainConfig& cfg = state_.config;
  const auto b = static_cast<double>(batch.samples.size());
  const auto inv_b = static_cast<float>(1.0 / b);
  nn::Grads grads(state_.generator.params());
  for (std::size_t i = 0; i < batch.samples.size(); ++i) {
    const FamilySample& s = batch.samples[i];
    const Tensor& fake_image = batch.fakes[i];
    MultiScaleDiscriminator::Tape tf;
    const auto real = state_.discriminator.discriminate(s.images, s.target_original);
    const auto fake = state_.discriminator.discriminate(s.images, fake_image, &tf);
    const GanLosses l = gan_losses(real, fake, cfg.lambda_fm);
    m.loss_g_adv += l.loss_g_adv / b;
    m.loss_g_fm += l.loss_g_fm / b;
    auto dg = g_loss_grad(real, fake, cfg.lambda_fm);
    scale_outputs(dg, inv_b);
    Tensor d_fake = state_.discriminator.backward(tf, dg, nullptr, true);

    double l1 = 0.0;
    const auto w = static_cast<float>(cfg.lambda_l1 / static_cast<double>(d_fake.size())) * inv_b;
    for (std::size_t k = 0; k < d_fake.size(); ++k) {
      const float diff = fake_image[k] - s.target_original[k];
      l1 += std::fabs(diff);
      if (cfg.lambda_l1 > 0.0) d_fake[k] += diff > 0 ? w : (diff < 0 ? -w : 0.0f);
    }
    m.loss_g_l1 += l1 / static_cast<double>(d_fake.size()) / b;
    state_.generator.backward(batch.tapes[i], s.adjacency, d_fake, grads);
  }
  state_.opt_g.step(state_.generator.params(), grads);
}

StepMetrics Trainer::step() {
  StepMetrics m;
  m.step = state_.step;
  const Batch batch = prepare_batch();
  m.epoch = state_.epoch;
  discriminator_step(batch, m);
  generator_step(batch, m);
  ++state_.step;
  if (!std::isfinite(m.loss_d) || !std::isfinite(m.loss_g_adv) || !std::isfinite(m.loss_g_fm) ||
      !std::isfinite(m.loss_g_l1)) {
    throw NonFiniteLossError("non-finite loss at step " + std::to_string(m.step) + ": " + m.to_json().dump(), m);
  }
  return m;
}

// ---------------------------------------------------------------------------

TrainResult train(const TrainConfig& cfg, const std::filesystem::path& manifest,
                  const std::filesystem::path& out_dir, const std::function<void(const StepMetrics&)>& on_step) {
  cfg.validate();
  const Corpus corpus = Corpus::load(manifest, cfg.generator.image_size);
  if (corpus.families.empty()) throw std::runtime_error("corpus has no eligible families");
  const Split split = split_families(static_cast<int>(corpus.families.size()), cfg.holdout_fraction);
  std::vector<const FamilyData*> training;
  for (int i : split.train) training.push_back(&corpus.families[i]);

  std::filesystem::create_directories(out_dir);
  TrainResult result;
  result.checkpoint = out_dir / "checkpoint.g2p";
  result.metrics_log = out_dir / "metrics.jsonl";
  std::ofstream log(result.metrics_log, std::ios::binary | std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + result.metrics_log.string());

  Trainer trainer(TrainState::fresh(cfg), training);
  while (!trainer.done()) {
    StepMetrics m;
    try {
      m = trainer.step();
    } catch (const NonFiniteLossError& e) {
      log << e.metrics.to_json().dump() << '\n';
      trainer.state().save(out_dir / "nonfinite.g2p");
      throw;
    }
    log << m.to_json().dump() << '\n';
    log.flush();
    result.log.push_back(m);
    if (on_step) on_step(m);
    if (cfg.checkpoint_every > 0 && trainer.state().step % cfg.checkpoint_every == 0) {
      trainer.state().save(result.checkpoint);
    }
  }
  trainer.state().save(result.checkpoint);
  result.state = std::move(trainer.state());
  return result;
}

double reconstruction_l1(const Generator& gen, std::span<const FamilyData* const> families,
                         std::uint64_t seed, bool random_adjacency) {
  double total = 0.0;
  for (std::size_t i = 0; i < families.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    const FamilySample s = make_child_sample(*families[i], rng, random_adjacency);
    const Tensor out = gen.generate(s.images, s.adjacency, 0);
    double sum = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) sum += std::fabs(static_cast<double>(out[k]) - s.target_original[k]);
    total += sum / static_cast<double>(out.size());
  }
  return families.empty() ? 0.0 : total / static_cast<double>(families.size());
}

std::uint64_t parameter_hash(const std::vector<const nn::Param*>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const nn::Param* p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    for (std::size_t i = 0; i < p->value.size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace g2p
