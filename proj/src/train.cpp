#include "llab/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace llab {

namespace {

constexpr uint64_t kDataTag = 0xDA7A0000ULL;

PhaseFlops& phase_of(FlopLedger& ledger, Phase p) {
  switch (p) {
    case Phase::Warmup:
      return ledger.warmup;
    case Phase::Discovery:
      return ledger.discovery;
    case Phase::Retrain:
      return ledger.retrain;
  }
  return ledger.retrain;
}

}  // namespace

EvalResult evaluate(const ModelSpec& model, const std::vector<double>& params,
                    const Dataset& data, int batch_size) {
  EvalResult r;
  if (data.size() == 0) return r;
  size_t correct = 0;
  double loss_sum = 0.0;
  for (size_t start = 0; start < data.size(); start += batch_size) {
    const size_t end = std::min(data.size(), start + batch_size);
    std::vector<size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Batch batch = data.gather(idx);
    auto g = forward(model, params, batch);
    loss_sum += g.loss * static_cast<double>(batch.size());
    const int C = model.n_classes;
    const auto& logits = g.acts.back();
    for (size_t s = 0; s < batch.size(); ++s) {
      int best = 0;
      for (int c = 1; c < C; ++c)
        if (logits.data[s * C + c] > logits.data[s * C + best]) best = c;
      correct += best == batch.labels[s] ? 1 : 0;
    }
  }
  r.loss = loss_sum / static_cast<double>(data.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return r;
}

RunResult train(const ModelSpec& model, std::vector<double> params, const TrainRecipe& recipe,
                const Dataset& train_set, const Dataset& test_set, const UpdateRule& rule,
                const TrainOptions& opts) {
  if (recipe.epochs < 0 || recipe.batch_size < 1) throw Error("bad recipe");
  const bool masked = rule.kind != UpdateRule::Kind::Vanilla;
  if (masked && rule.mask.size() != model.param_count)
    throw Error("update rule mask length does not match model");
  if (rule.kind == UpdateRule::Kind::Rise && rule.frozen.values.size() != model.param_count)
    throw Error("frozen reference length does not match model");
  if (params.size() != model.param_count) throw Error("params length does not match model");

  const auto t0 = std::chrono::steady_clock::now();
  RunResult result;
  result.seed = recipe.seed;
  result.mask = masked ? rule.mask : Mask::all_ones(model.param_count);

  if (rule.kind == UpdateRule::Kind::Lot) params = apply_mask(params, rule.mask);

  OptimState state(model.param_count, recipe.momentum, recipe.weight_decay);
  if (!opts.initial_momentum.empty()) {
    if (opts.initial_momentum.size() != model.param_count)
      throw Error("initial momentum length mismatch");
    state.momentum = opts.initial_momentum;
  }
  // Masked-out parameters carry no velocity across mask application.
  if (masked)
    for (size_t i = 0; i < model.param_count; ++i)
      if (!rule.mask.bits[i]) state.momentum[i] = 0.0;

  if (opts.record_store != nullptr && !opts.record_store->has(opts.epoch_offset))
    opts.record_store->save(opts.epoch_offset, params, state.momentum, recipe.seed);

  const Mask* flop_mask = masked ? &result.mask : nullptr;
  std::vector<size_t> order(train_set.size());
  int step = 0;
  for (int e = 0; e < recipe.epochs; ++e) {
    const int wall_epoch = opts.epoch_offset + e;
    const double lr = recipe.lr.rate(wall_epoch);

    std::iota(order.begin(), order.end(), 0);
    Rng data_rng(derive_seed(recipe.seed, kDataTag + static_cast<uint64_t>(wall_epoch)));
    shuffle(order, data_rng);

    double epoch_loss = 0.0;
    size_t n_batches = 0;
    for (size_t start = 0; start < order.size(); start += recipe.batch_size) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(recipe.batch_size));
      const std::vector<size_t> idx(order.begin() + start, order.begin() + end);
      const Batch batch = train_set.gather(idx);

      double loss;
      std::vector<double> grad;
      try {
        auto g = forward(model, params, batch);
        loss = g.loss;
        grad = backward(g);
      } catch (const Error& err) {
        throw DivergedError("training diverged at epoch " + std::to_string(wall_epoch) +
                            " step " + std::to_string(step) + ": " + err.what());
      }

      const auto u = update_term(state, params, grad, lr);
      switch (rule.kind) {
        case UpdateRule::Kind::Vanilla:
          for (size_t i = 0; i < params.size(); ++i) params[i] -= u[i];
          break;
        case UpdateRule::Kind::Lot:
          params = lot_update(params, u, rule.mask);
          break;
        case UpdateRule::Kind::Rise:
          params = rise_update(params, u, rule.mask, rule.frozen);
          break;
      }
      if (masked)
        for (size_t i = 0; i < params.size(); ++i)
          if (!rule.mask.bits[i]) state.momentum[i] = 0.0;

      epoch_loss += loss;
      ++n_batches;
      ++step;
      if (opts.on_step) opts.on_step(step, params);
    }

    result.train_loss.push_back(epoch_loss / static_cast<double>(n_batches));
    const EvalResult ev = evaluate(model, params, test_set, recipe.batch_size);
    result.test_loss.push_back(ev.loss);
    result.test_acc.push_back(ev.accuracy);
    accrue_epoch(phase_of(result.ledger, opts.phase), model, train_set.size(), flop_mask);

    if (opts.record_store != nullptr)
      opts.record_store->save(wall_epoch + 1, params, state.momentum, recipe.seed);
  }

  result.final_params = std::move(params);
  result.test_accuracy = result.test_acc.empty() ? 0.0 : result.test_acc.back();
  result.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

WarmupResult warmup(const ModelSpec& model, const std::vector<double>& w0, int k,
                    const TrainRecipe& recipe, const Dataset& train_set, const Dataset& test_set,
                    const CheckpointStore* store) {
  if (k < 0) throw Error("negative warm-up length");
  if (k > recipe.epochs) throw Error("warm-up k exceeds recipe epochs");

  WarmupResult out;
  for (int e = 0; e < k; ++e) accrue_epoch(out.flops, model, train_set.size(), nullptr);

  std::vector<double> params = w0;
  std::vector<double> momentum;
  int start_epoch = 0;
  if (store != nullptr) {
    const int resume = store->latest(k);
    if (resume > 0) {
      auto snap = store->load(resume);
      if (snap.params.size() != model.param_count)
        throw Error("checkpoint store does not match model");
      params = std::move(snap.params);
      momentum = std::move(snap.momentum);
      start_epoch = resume;
    }
  }

  if (start_epoch < k) {
    TrainRecipe seg = recipe;
    seg.epochs = k - start_epoch;
    TrainOptions opts;
    opts.epoch_offset = start_epoch;
    opts.phase = Phase::Warmup;
    opts.initial_momentum = std::move(momentum);
    opts.record_store = store;
    auto run = train(model, std::move(params), seg, train_set, test_set,
                     UpdateRule::vanilla(), opts);
    params = std::move(run.final_params);
  } else if (store != nullptr && start_epoch == k && k > 0) {
    auto snap = store->load(k);
    params = std::move(snap.params);
  }

  out.wk = std::move(params);
  return out;
}

IlotResult i_lot_r(const ModelSpec& model, const std::vector<double>& w0, double r_percent,
                   int iterations, const TrainRecipe& recipe, const Dataset& train_set,
                   const Dataset& test_set, int epoch_offset) {
  if (iterations < 1) throw Error("I-LOT-R needs at least one iteration");
  if (!(r_percent > 0.0 && r_percent <= 100.0)) throw Error("R out of range (0, 100]");

  IlotResult out;
  Mask mask = Mask::all_ones(model.param_count);
  for (int i = 0; i < iterations; ++i) {
    IlotIteration iter;
    iter.start_params = apply_mask(w0, mask);  // Alg. 1 line 5: rewind
    TrainOptions opts;
    opts.epoch_offset = epoch_offset;
    opts.phase = Phase::Discovery;
    iter.run = train(model, iter.start_params, recipe, train_set, test_set,
                     UpdateRule::lot(mask), opts);
    iter.run.algorithm = iterations == 1 ? "1-LOT" : "I-LOT";
    mask = magnitude_prune(iter.run.final_params, r_percent, mask, model.is_weight);
    iter.mask_after = mask;
    out.iterations.push_back(std::move(iter));
  }
  out.final_mask = std::move(mask);
  return out;
}

RiseResult rise_r(const ModelSpec& model, const std::vector<double>& wk, double r_percent,
                  const TrainRecipe& recipe, const Dataset& train_set, const Dataset& test_set,
                  int epoch_offset) {
  if (!(r_percent > 0.0 && r_percent <= 100.0)) throw Error("R out of range (0, 100]");

  RiseResult out;
  TrainOptions disc;
  disc.epoch_offset = epoch_offset;
  disc.phase = Phase::Discovery;
  out.discovery = train(model, wk, recipe, train_set, test_set, UpdateRule::vanilla(), disc);
  out.discovery.algorithm = "RISE";

  out.mask = magnitude_prune(out.discovery.final_params, r_percent,
                             Mask::all_ones(model.param_count), model.is_weight);

  TrainOptions re;
  re.epoch_offset = epoch_offset;
  re.phase = Phase::Retrain;
  out.masked = train(model, wk, recipe, train_set, test_set,
                     UpdateRule::rise(out.mask, FrozenReference{wk}), re);
  out.masked.algorithm = "RISE";
  return out;
}

DispatchResult warmup_and_dispatch(const ModelSpec& model, const std::vector<double>& w0, int k,
                                   const TrainRecipe& recipe, const Dataset& train_set,
                                   const Dataset& test_set, const Method& method,
                                   const CheckpointStore* store, bool schedule_restart_local) {
  auto wu = warmup(model, w0, k, recipe, train_set, test_set, store);

  // The post-warm-up trainings resume the schedule at wall epoch k by
  // default; the local-restart flag is the ablation switch.
  const int offset = schedule_restart_local ? 0 : k;
  DispatchResult out;
  if (method.kind == Method::Kind::Rise) {
    auto rise = rise_r(model, wu.wk, method.r_percent, recipe, train_set, test_set, offset);
    out.mask = rise.mask;
    out.final_run = std::move(rise.masked);
    out.final_run.ledger.discovery += rise.discovery.ledger.discovery;
  } else {
    auto ilot = i_lot_r(model, wu.wk, method.r_percent, method.iterations, recipe, train_set,
                        test_set, offset);
    out.mask = ilot.final_mask;
    // Performance training with the final mask: rewind to W^k * M and
    // train under the zeroing rule.
    TrainOptions re;
    re.epoch_offset = offset;
    re.phase = Phase::Retrain;
    out.final_run = train(model, apply_mask(wu.wk, out.mask), recipe, train_set, test_set,
                          UpdateRule::lot(out.mask), re);
    out.final_run.algorithm = method.iterations == 1 ? "1-LOT" : "I-LOT";
    for (const auto& iter : ilot.iterations)
      out.final_run.ledger.discovery += iter.run.ledger.discovery;
  }
  out.final_run.ledger.warmup += wu.flops;
  return out;
}

}  // namespace llab
