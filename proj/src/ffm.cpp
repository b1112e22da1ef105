#include "dfecs/ffm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "dfecs/error.hpp"
#include "dfecs/eval.hpp"
#include "dfecs/kpm.hpp"
#include "dfecs/parallel.hpp"

namespace dfecs {

namespace {

std::vector<double> half_step_grid() {
    std::vector<double> out;
    for (int i = 10; i >= 1; --i) out.push_back(0.5 * i);
    return out;
}

std::vector<double> with_extra(std::vector<double> base, std::initializer_list<double> extra) {
    for (double a : extra) {
        if (std::find(base.begin(), base.end(), a) == base.end()) base.push_back(a);
    }
    std::sort(base.begin(), base.end(), std::greater<>());
    return base;
}

std::vector<double> descending(std::vector<double> values) {
    std::sort(values.begin(), values.end(), std::greater<>());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    return values;
}

std::vector<int> rank_range(const std::vector<int>& requested, int upper) {
    std::vector<int> out;
    if (requested.empty()) {
        for (int r = 1; r <= upper; ++r) out.push_back(r);
        return out;
    }
    for (int r : requested) {
        if (r >= 1 && r <= upper) out.push_back(r);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

constexpr double kBoundSlack = 1e-6;

// A grid cell under evaluation together with the fitted model it produced.
template <class Model>
struct Candidate {
    GridCell cell;
    Model model;
};

/// Scans rows of cells in order and returns the index of the first cell reaching `target`.
/// Cells are fitted in chunks of `threads`; the choice depends only on cell order.
template <class Model, class Fit>
std::optional<std::size_t> scan_row(std::vector<Candidate<Model>>& row, double target, int threads, const Fit& fit,
                                    std::optional<Candidate<Model>>& best) {
    const std::size_t chunk = static_cast<std::size_t>(std::max(1, threads));
    for (std::size_t start = 0; start < row.size(); start += chunk) {
        const std::size_t stop = std::min(row.size(), start + chunk);
        parallel_for(stop - start, threads, [&](std::size_t i) { fit(row[start + i]); });
        for (std::size_t i = start; i < stop; ++i) {
            if (!best || row[i].cell.ve > best->cell.ve) best = row[i];
            if (row[i].cell.ve >= target) return i;
        }
    }
    return std::nullopt;
}

}  // namespace

GridSpec GridSpec::defaults() {
    GridSpec g;
    g.alphas = half_step_grid();
    g.alphas_basis = half_step_grid();
    g.alphas_encoding = half_step_grid();
    return g;
}

GridSpec GridSpec::paper_si() {
    GridSpec g = defaults();
    g.alphas = with_extra(g.alphas, {0.1, 1.15, 2.1, 2.5});
    g.alphas_basis = with_extra(g.alphas_basis, {0.1, 1.15, 2.1, 2.5});
    g.alphas_encoding = with_extra(g.alphas_encoding, {0.1, 1.15, 2.1, 2.5});
    return g;
}

void GridSpec::validate() const {
    for (const auto* axis : {&alphas, &alphas_basis, &alphas_encoding}) {
        if (axis->empty()) throw Error(ErrorKind::EmptyGrid, "alpha grid is empty");
        for (double a : *axis) {
            if (!(a > 0.0) || !std::isfinite(a)) throw Error(ErrorKind::ConfigError, "grid alphas must be positive");
        }
    }
    for (const auto* axis : {&part_ranks, &hier_ranks}) {
        for (int r : *axis) {
            if (r < 1) throw Error(ErrorKind::ConfigError, "grid ranks must be at least 1");
        }
    }
}

std::vector<double> rank_ve_bounds(const Eigen::MatrixXd& data) {
    const Eigen::MatrixXd gram = data * data.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd lambda = eig.eigenvalues().reverse().cwiseMax(0.0);
    const double total = lambda.sum();
    std::vector<double> bounds(static_cast<std::size_t>(lambda.size()) + 1, 100.0);
    bounds[0] = 0.0;
    double acc = 0.0;
    for (Eigen::Index r = 0; r < lambda.size(); ++r) {
        acc += lambda(r);
        bounds[static_cast<std::size_t>(r) + 1] = total > 0.0 ? 100.0 * std::min(1.0, acc / total) : 100.0;
    }
    return bounds;
}

PartModel fit_pfm(const Eigen::MatrixXd& part_data, FacePart part, double beta, const GridSpec& grid,
                  const FitOptions& options) {
    if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorKind::ConfigError, "beta must lie in (0, 1)");
    options.solver.validate();
    if (grid.alphas.empty()) throw Error(ErrorKind::EmptyGrid, "part alpha grid is empty");

    PartModel out;
    out.part = part;
    if (part_data.squaredNorm() == 0.0) {
        out.skipped = true;
        return out;
    }
    const double target = 100.0 * (1.0 - beta / 2.0);
    const int max_rank = static_cast<int>(std::min(part_data.rows(), part_data.cols()));
    const std::vector<int> ranks = rank_range(grid.part_ranks, max_rank);
    const std::vector<double> alphas = descending(grid.alphas);
    if (ranks.empty()) throw Error(ErrorKind::EmptyGrid, "no admissible part ranks in grid");

    const std::vector<double> bounds = rank_ve_bounds(part_data);
    const std::uint64_t part_seed = mix_seed(options.solver.seed, static_cast<std::uint64_t>(part));

    using Cand = Candidate<DictionaryModel<double>>;
    auto fit = [&](Cand& c) {
        SolverConfig cfg = options.solver;
        cfg.seed = mix_seed(part_seed, static_cast<std::uint64_t>(c.cell.rank) * 1000003ULL +
                                           static_cast<std::uint64_t>(std::llround(c.cell.alpha * 1e6)));
        c.model = fit_dictionary<double>(part_data, c.cell.rank, c.cell.alpha, cfg);
        c.cell.ve = variance_explained(part_data, c.model.dictionary * c.model.codes);
        c.cell.fitted = true;
    };
    auto make_row = [&](int rank) {
        std::vector<Cand> row;
        for (double a : alphas) row.push_back({GridCell{rank, a, 0.0, 0.0, false}, {}});
        return row;
    };
    auto record = [&](const std::vector<Cand>& row) {
        for (const Cand& c : row) out.cells.push_back(c.cell);
    };

    std::optional<Cand> best;
    std::vector<int> pruned;
    for (int rank : ranks) {
        if (options.prune_by_rank && bounds[static_cast<std::size_t>(rank)] < target - kBoundSlack) {
            pruned.push_back(rank);
            record(make_row(rank));
            continue;
        }
        std::vector<Cand> row = make_row(rank);
        const auto hit = scan_row(row, target, options.threads, fit, best);
        record(row);
        if (hit) {
            const Cand& chosen = row[*hit];
            out.model = chosen.model;
            out.rank = rank;
            out.alpha = chosen.cell.alpha;
            out.ve = chosen.cell.ve;
            return out;
        }
    }

    // Nothing qualified: the answer is the best cell overall, so pruned rows that could still beat the
    // current best get fitted too.
    for (int rank : pruned) {
        if (best && bounds[static_cast<std::size_t>(rank)] <= best->cell.ve) continue;
        std::vector<Cand> row = make_row(rank);
        scan_row(row, std::numeric_limits<double>::infinity(), options.threads, fit, best);
        for (const Cand& c : row) {
            for (GridCell& cell : out.cells) {
                if (cell.rank == c.cell.rank && cell.alpha == c.cell.alpha) cell = c.cell;
            }
        }
    }
    out.grid_exhausted = true;
    out.model = best->model;
    out.rank = best->cell.rank;
    out.alpha = best->cell.alpha;
    out.ve = best->cell.ve;
    return out;
}

StackedParts stack_parts(const std::vector<PartModel>& parts) {
    Eigen::Index total = 0;
    std::optional<Eigen::Index> samples;
    for (const PartModel& p : parts) {
        if (p.skipped) continue;
        if (p.model.dictionary.rows() != part_dim(p.part)) {
            throw Error(ErrorKind::ShapeError, "dictionary rows do not match part " + std::string(part_name(p.part)));
        }
        if (samples && *samples != p.model.codes.cols()) {
            throw Error(ErrorKind::ColumnMismatch, "part models were fitted on different column sets");
        }
        samples = p.model.codes.cols();
        total += p.model.dictionary.cols();
    }
    StackedParts out;
    out.basis = Eigen::MatrixXd::Zero(kKpmDim, total);
    out.codes = Eigen::MatrixXd::Zero(total, samples.value_or(0));
    Eigen::Index col = 0;
    for (const PartModel& p : parts) {
        if (p.skipped) continue;
        const Eigen::Index k = p.model.dictionary.cols();
        for (Eigen::Index j = 0; j < k; ++j) {
            out.basis.col(col + j) = expand_to_full(p.model.dictionary.col(j), p.part);
            out.column_parts.push_back(p.part);
        }
        out.codes.middleRows(col, k) = p.model.codes;
        col += k;
    }
    return out;
}

HierModel fit_hfm(const Eigen::MatrixXd& data, const Eigen::MatrixXd& part_basis, const Eigen::MatrixXd& codes,
                  double beta, const GridSpec& grid, const FitOptions& options) {
    if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorKind::ConfigError, "beta must lie in (0, 1)");
    options.solver.validate();
    if (grid.alphas_basis.empty() || grid.alphas_encoding.empty()) {
        throw Error(ErrorKind::EmptyGrid, "hierarchy alpha grid is empty");
    }
    if (part_basis.cols() != codes.rows() || data.cols() != codes.cols() || data.rows() != part_basis.rows()) {
        throw Error(ErrorKind::ShapeError, "X, U and V do not conform");
    }
    if (codes.size() > 0 && codes.minCoeff() < -1e-12) {
        throw Error(ErrorKind::NegativeInput, "stacked part codes must be nonnegative");
    }
    const double target = 100.0 * (1.0 - beta);
    const int max_rank = static_cast<int>(std::min(codes.rows(), codes.cols()));
    const std::vector<int> ranks = rank_range(grid.hier_ranks, max_rank);
    if (ranks.empty()) throw Error(ErrorKind::EmptyGrid, "no admissible hierarchy ranks in grid");
    const std::vector<double> alphas_a = descending(grid.alphas_basis);
    const std::vector<double> alphas_b = descending(grid.alphas_encoding);
    const std::vector<double> bounds = rank_ve_bounds(data);
    auto bound_for = [&](int rank) { return bounds[std::min<std::size_t>(static_cast<std::size_t>(rank), bounds.size() - 1)]; };

    using Cand = Candidate<NmfModel<double>>;
    auto fit = [&](Cand& c) {
        SolverConfig cfg = options.solver;
        cfg.seed = mix_seed(options.solver.seed ^ 0x48464dULL,
                            static_cast<std::uint64_t>(c.cell.rank) * 1000003ULL +
                                static_cast<std::uint64_t>(std::llround(c.cell.alpha * 1e6)) * 7919ULL +
                                static_cast<std::uint64_t>(std::llround(c.cell.alpha_encoding * 1e6)));
        c.model = fit_nmf<double>(codes, c.cell.rank, c.cell.alpha, c.cell.alpha_encoding, cfg);
        const Eigen::MatrixXd aus = part_basis * c.model.basis;
        c.cell.ve = variance_explained(data, aus * c.model.encoding);
        c.cell.fitted = true;
    };
    auto make_row = [&](int rank) {
        std::vector<Cand> row;
        for (double a : alphas_a) {
            for (double b : alphas_b) row.push_back({GridCell{rank, a, b, 0.0, false}, {}});
        }
        return row;
    };

    HierModel out;
    auto finish = [&](const Cand& chosen) {
        out.model = chosen.model;
        out.rank = chosen.cell.rank;
        out.alpha_basis = chosen.cell.alpha;
        out.alpha_encoding = chosen.cell.alpha_encoding;
        out.ve_full = chosen.cell.ve;
        const double codes_norm = codes.squaredNorm();
        out.ve_codes = codes_norm > 0.0 ? variance_explained(codes, chosen.model.basis * chosen.model.encoding) : 0.0;
    };

    std::optional<Cand> best;
    std::vector<int> pruned;
    for (int rank : ranks) {
        if (options.prune_by_rank && bound_for(rank) < target - kBoundSlack) {
            pruned.push_back(rank);
            for (const Cand& c : make_row(rank)) out.cells.push_back(c.cell);
            continue;
        }
        std::vector<Cand> row = make_row(rank);
        const auto hit = scan_row(row, target, options.threads, fit, best);
        for (const Cand& c : row) out.cells.push_back(c.cell);
        if (hit) {
            finish(row[*hit]);
            return out;
        }
    }
    for (int rank : pruned) {
        if (best && bound_for(rank) <= best->cell.ve) continue;
        std::vector<Cand> row = make_row(rank);
        scan_row(row, std::numeric_limits<double>::infinity(), options.threads, fit, best);
        for (const Cand& c : row) {
            for (GridCell& cell : out.cells) {
                if (cell.rank == c.cell.rank && cell.alpha == c.cell.alpha &&
                    cell.alpha_encoding == c.cell.alpha_encoding) {
                    cell = c.cell;
                }
            }
        }
    }
    out.grid_exhausted = true;
    finish(*best);
    return out;
}

FullFaceModel fit_ffm(const Eigen::MatrixXd& data, double beta, const GridSpec& grid, const FitOptions& options) {
    if (data.rows() != kKpmDim) throw Error(ErrorKind::ShapeError, "KPM data must have 136 rows");
    if (data.cols() == 0) throw Error(ErrorKind::ZeroData, "no training columns");
    if (!data.allFinite()) throw Error(ErrorKind::DegenerateData, "training data contains non-finite values");
    grid.validate();

    std::vector<PartModel> parts;
    for (FacePart part : kAllParts) {
        parts.push_back(fit_pfm(extract_part(data, part), part, beta, grid, options));
    }
    const StackedParts stacked = stack_parts(parts);
    if (stacked.basis.cols() == 0) throw Error(ErrorKind::ZeroData, "every face part is motionless");
    const HierModel hier = fit_hfm(data, stacked.basis, stacked.codes, beta, grid, options);

    FullFaceModel model;
    model.part_basis = stacked.basis;
    model.hier_basis = hier.model.basis;
    model.encoding = hier.model.encoding;
    model.aus = model.part_basis * model.hier_basis;
    model.beta = beta;
    model.ve_train = hier.ve_full;
    model.seed = options.solver.seed;
    model.train_columns = static_cast<std::size_t>(data.cols());
    for (const PartModel& p : parts) {
        model.parts.push_back({p.part, p.rank, p.alpha, p.ve, p.grid_exhausted, p.skipped});
    }
    model.hier = {hier.rank, hier.alpha_basis, hier.alpha_encoding, hier.ve_full, hier.ve_codes, hier.grid_exhausted};
    return model;
}

void check_model_consistency(const FullFaceModel& model) {
    const auto& u = model.part_basis;
    const auto& a = model.hier_basis;
    const auto& b = model.encoding;
    if (u.rows() != kKpmDim || u.cols() != a.rows() || a.cols() != b.rows() || model.aus.rows() != kKpmDim ||
        model.aus.cols() != a.cols()) {
        throw Error(ErrorKind::InconsistentModel, "U (136 x k), A (k x q), B (q x m) and U' (136 x q) do not conform");
    }
    if ((a.size() > 0 && a.minCoeff() < 0.0) || (b.size() > 0 && b.minCoeff() < 0.0)) {
        throw Error(ErrorKind::InconsistentModel, "hierarchy factors must be nonnegative");
    }
    const Eigen::MatrixXd product = u * a;
    if (u.size() > 0 && a.size() > 0 && (product - model.aus).cwiseAbs().maxCoeff() >
                                  1e-12 * std::max(1.0, u.cwiseAbs().maxCoeff() * a.cwiseAbs().colwise().sum().maxCoeff())) {
        throw Error(ErrorKind::InconsistentModel, "stored action units differ from U A");
    }
    // Part columns must stay inside their own rows.
    Eigen::Index col = 0;
    for (const PartSummary& p : model.parts) {
        if (p.skipped) continue;
        for (Eigen::Index j = col; j < col + p.rank && j < u.cols(); ++j) {
            const Eigen::Index lo = part_row_offset(p.part);
            const Eigen::Index hi = lo + part_dim(p.part);
            const double outside = u.col(j).head(lo).squaredNorm() + u.col(j).tail(kKpmDim - hi).squaredNorm();
            if (outside != 0.0) {
                throw Error(ErrorKind::InconsistentModel, "part atom has entries outside its part rows");
            }
        }
        col += p.rank;
    }
}

}  // namespace dfecs
