#include "knnmt/pipeline.hpp"

namespace knnmt {

namespace {
constexpr std::uint64_t kPerturbDomain = 0x7065727475726231ULL;
}

void PipelineConfig::validate() const {
  if (search.k == 0) throw InvalidInput("k must be >= 1");
  if (search.use_ivf && search.n_probe == 0) throw InvalidInput("n_probe must be >= 1");
  score.validate();
  perturb.validate();
}

Datastore build_model_datastore(const TableModel& model, const ParallelCorpus& corpus) {
  Datastore ds(model.embed_dim(), model.target_vocab().size());
  for (const auto& pair : corpus) {
    const auto source = model.encode_source(pair.source);
    const auto target = model.encode_target(pair.target);
    for (std::size_t i = 1; i < target.size(); ++i) {
      const std::span<const TokenId> prefix(target.data(), i);
      ds.add(model.hidden_state(source, prefix), target[i]);
    }
  }
  return ds;
}

std::vector<std::vector<float>> teacher_forced_queries(const TableModel& model,
                                                       const ParallelCorpus& corpus) {
  std::vector<std::vector<float>> queries;
  for (const auto& pair : corpus) {
    const auto source = model.encode_source(pair.source);
    const auto target = model.encode_target(pair.target);
    for (std::size_t i = 1; i < target.size(); ++i)
      queries.push_back(model.hidden_state(source, std::span<const TokenId>(target.data(), i)));
  }
  return queries;
}

Pipeline::Pipeline(const TableModel& model, const Datastore* datastore, const IvfIndex* index,
                   PipelineConfig config)
    : model_(model), datastore_(datastore), index_(index), config_(config) {
  config_.validate();
  if (datastore_) {
    if (datastore_->dim() != model_.embed_dim())
      throw InvalidInput("datastore dim does not match the model hidden size");
    if (datastore_->vocab_size() != model_.target_vocab().size())
      throw InvalidInput("datastore vocabulary does not match the model target vocabulary");
  }
  if (config_.search.use_ivf) {
    if (!index_) throw InvalidInput("IVF search requested without an index");
    if (datastore_ && index_->assignments().size() != datastore_->size())
      throw InvalidInput("IVF index was built for a different datastore");
    if (config_.search.n_probe > index_->n_clusters())
      throw InvalidInput("n_probe exceeds the number of clusters");
  }
}

RngStream Pipeline::step_stream(std::uint64_t sentence, std::uint64_t slot, std::uint64_t step) const {
  return RngStream(config_.perturb.seed).child({kPerturbDomain, sentence, slot, step});
}

NeighborSet Pipeline::search(std::span<const float> query, std::size_t k) const {
  if (config_.search.use_ivf)
    return search_ivf(*datastore_, *index_, query, k, config_.search.n_probe);
  return search_exact(*datastore_, query, k);
}

TokenDistribution Pipeline::next_distribution(std::span<const TokenId> source,
                                              std::span<const TokenId> prefix, RngStream rng,
                                              StepTrace* trace) const {
  StepOutput out = model_.step(source, prefix);
  const double lambda = config_.score.lambda;
  if (!datastore_ || lambda == 0.0) {
    // The kNN term has zero weight; result is p_mt either way.
    if (trace) *trace = StepTrace{std::move(out.hidden), {}, {}, {}, !datastore_};
    return std::move(out.p_mt);
  }

  const PerturbConfig& perturb = config_.perturb;
  const std::size_t k = config_.search.k;
  std::vector<float> query = std::move(out.hidden);
  NoiseParams noise;
  if (perturb.kind == PerturbKind::adaptive_noise) {
    const NeighborSet pre = search(query, k);
    if (!pre.empty()) noise = adaptive_params(pre, perturb.h_m_adaptive, perturb.h_s_adaptive);
  } else if (perturb.kind == PerturbKind::static_noise) {
    noise = {perturb.h_m, perturb.h_s};
  }
  if (perturb.kind == PerturbKind::static_noise || perturb.kind == PerturbKind::adaptive_noise)
    query = noised_query(query, noise, rng);

  const bool randomize = perturb.kind == PerturbKind::randomize;
  NeighborSet retrieved = search(query, randomize ? std::max(k, expanded_k(perturb.h, k)) : k);
  NeighborSet neighbors = randomize ? randomized_select(retrieved, k, rng) : retrieved;

  const double tau = config_.score.temperature;
  auto p_knn = config_.score.uniquify ? uniquify_distribution(neighbors, tau, vocab_size())
                                      : knn_distribution(neighbors, tau, vocab_size());
  Interpolated mixed = interpolate(p_knn, out.p_mt, lambda);
  if (trace)
    *trace = StepTrace{std::move(query), noise, std::move(retrieved), std::move(neighbors),
                       mixed.fallback};
  return std::move(mixed.dist);
}

}  // namespace knnmt
