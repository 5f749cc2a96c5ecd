#include "tagg/baselines.hpp"

#include <algorithm>

namespace tagg {

std::vector<int> collapse_runs(const std::vector<int>& labels) {
  std::vector<int> out;
  for (int l : labels) {
    if (out.empty() || out.back() != l) out.push_back(l);
  }
  return out;
}

// --- transition matrix ------------------------------------------------------------

TransitionMatrix TransitionMatrix::fit(const std::vector<LabeledSequence>& seqs, int n_actions,
                                       double alpha) {
  if (n_actions < 1) throw std::invalid_argument("transition matrix needs n_actions >= 1");
  TransitionMatrix tm;
  tm.n_actions = n_actions;
  tm.alpha = alpha;
  tm.counts.assign(static_cast<size_t>(n_actions) * n_actions, 0.0);
  tm.prior.assign(static_cast<size_t>(n_actions), 0.0);
  int64_t transitions = 0;
  for (const LabeledSequence& seq : seqs) {
    const auto labels = collapse_runs(seq.labels);
    std::vector<double>* activity_counts = nullptr;
    if (seq.activity >= 0) {
      auto [it, inserted] = tm.per_activity.try_emplace(
          seq.activity, static_cast<size_t>(n_actions) * n_actions, 0.0);
      activity_counts = &it->second;
    }
    for (size_t i = 0; i + 1 < labels.size(); ++i) {
      const auto idx = static_cast<size_t>(labels[i]) * n_actions + labels[i + 1];
      tm.counts[idx] += 1.0;
      tm.prior[static_cast<size_t>(labels[i + 1])] += 1.0;
      if (activity_counts) (*activity_counts)[idx] += 1.0;
      ++transitions;
    }
  }
  if (transitions == 0) throw std::invalid_argument("no transitions observed");
  return tm;
}

std::vector<double> TransitionMatrix::row_probs(int last, int activity) const {
  if (last < 0 || last >= n_actions) {
    throw std::invalid_argument("action " + std::to_string(last) + " outside vocabulary");
  }
  const std::vector<double>* counts_ptr = &counts;
  if (activity >= 0) {
    auto it = per_activity.find(activity);
    if (it != per_activity.end()) counts_ptr = &it->second;
  }
  std::vector<double> row(static_cast<size_t>(n_actions));
  double total = 0.0;
  for (int j = 0; j < n_actions; ++j) {
    row[static_cast<size_t>(j)] =
        (*counts_ptr)[static_cast<size_t>(last) * n_actions + j] + alpha;
    total += row[static_cast<size_t>(j)];
  }
  if (total == 0.0) {  // alpha == 0 and unseen action: global prior
    double prior_total = 0.0;
    for (double p : prior) prior_total += p;
    for (int j = 0; j < n_actions; ++j) row[static_cast<size_t>(j)] = prior[static_cast<size_t>(j)] / prior_total;
    return row;
  }
  for (double& p : row) p /= total;
  return row;
}

int TransitionMatrix::predict(int last, int activity) const {
  return argmax_lowest(row_probs(last, activity));
}

// --- lookup table ------------------------------------------------------------------

LookupTable LookupTable::fit(const std::vector<LabeledSequence>& seqs, int n_actions, int n_max,
                             double alpha) {
  if (n_max < 1) throw std::invalid_argument("lookup table needs n_max >= 1");
  LookupTable lut;
  lut.n_max = n_max;
  lut.tm = TransitionMatrix::fit(seqs, n_actions, alpha);
  for (const LabeledSequence& seq : seqs) {
    const auto labels = collapse_runs(seq.labels);
    for (size_t next = 1; next < labels.size(); ++next) {
      const int max_ctx = std::min<int>(n_max, static_cast<int>(next));
      for (int n = 1; n <= max_ctx; ++n) {
        std::vector<int> ctx(labels.begin() + (static_cast<int>(next) - n),
                             labels.begin() + static_cast<int>(next));
        auto [it, inserted] = lut.table.try_emplace(std::move(ctx),
                                                    static_cast<size_t>(n_actions), 0.0);
        it->second[static_cast<size_t>(labels[next])] += 1.0;
      }
    }
  }
  return lut;
}

int LookupTable::predict(const std::vector<int>& context, int activity) const {
  const int max_ctx = std::min<int>(n_max, static_cast<int>(context.size()));
  // Longest stored suffix wins; back off to shorter suffixes, then the TM
  // (which itself falls back to the prior).
  for (int n = max_ctx; n >= 1; --n) {
    std::vector<int> suffix(context.end() - n, context.end());
    auto it = table.find(suffix);
    if (it != table.end()) return argmax_lowest(it->second);
  }
  if (!context.empty()) return tm.predict(context.back(), activity);
  return argmax_lowest(tm.prior);
}

// --- recurrent baseline --------------------------------------------------------------

namespace {

Tensor onehot(int index, int n) {
  Tensor t = Tensor::zeros({n});
  t.data()[index] = 1.0;
  return t;
}

Tensor rnn_logits(const RnnBaseline& model, const std::vector<int>& context) {
  LstmState state = LstmState::zeros(model.rnn.hidden);
  for (int label : context) {
    state = lstm_step(model.rnn, onehot(label, model.n_actions), state);
  }
  return model.head.apply(state.h);
}

}  // namespace

RnnBaseline RnnBaseline::fit(const std::vector<LabeledSequence>& seqs, int n_actions,
                             const RnnBaselineConfig& cfg) {
  Rng rng(cfg.seed);
  RnnBaseline model;
  model.n_actions = n_actions;
  model.rnn = LstmParams::create(n_actions, cfg.hidden, rng);
  model.head = Linear::create(n_actions, cfg.hidden, rng, 0.1);

  // Training pairs: every proper prefix of a collapsed sequence predicts the
  // following segment label.
  struct Pair {
    const LabeledSequence* seq;
    std::vector<int> ctx;
    int next;
  };
  std::vector<Pair> pairs;
  std::vector<std::vector<int>> collapsed;
  collapsed.reserve(seqs.size());
  for (const LabeledSequence& seq : seqs) collapsed.push_back(collapse_runs(seq.labels));
  for (size_t s = 0; s < seqs.size(); ++s) {
    for (size_t i = 1; i < collapsed[s].size(); ++i) {
      pairs.push_back(Pair{&seqs[s],
                           std::vector<int>(collapsed[s].begin(), collapsed[s].begin() + static_cast<int>(i)),
                           collapsed[s][i]});
    }
  }
  if (pairs.empty()) throw std::invalid_argument("no training pairs for the recurrent baseline");

  std::vector<Tensor*> params;
  model.rnn.visit("rnn", [&](const std::string&, Tensor& t) { params.push_back(&t); });
  model.head.visit("head", [&](const std::string&, Tensor& t) { params.push_back(&t); });
  AdamState opt;
  opt.lr = cfg.lr;

  std::vector<size_t> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng = rng.split(17);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    for (size_t at = 0; at < order.size(); at += static_cast<size_t>(cfg.batch)) {
      Tape tape;
      for (Tensor* p : params) tape.watch(*p);
      Tensor loss;
      int batched = 0;
      for (size_t b = at; b < std::min(order.size(), at + static_cast<size_t>(cfg.batch)); ++b) {
        const Pair& pair = pairs[order[b]];
        Tensor li = cross_entropy(rnn_logits(model, pair.ctx), pair.next);
        loss = loss.empty() ? li : add(loss, li);
        ++batched;
      }
      loss = scale(loss, 1.0 / batched);
      tape.backward(loss);
      std::vector<Tensor> grads;
      for (Tensor* p : params) grads.push_back(tape.grad(*p));
      adam_step(params, grads, opt);
    }
  }
  return model;
}

std::vector<double> RnnBaseline::scores(const std::vector<int>& context) const {
  return rnn_logits(*this, collapse_runs(context)).values();
}

int RnnBaseline::predict(const std::vector<int>& context) const {
  return argmax_lowest(scores(context));
}

}  // namespace tagg
