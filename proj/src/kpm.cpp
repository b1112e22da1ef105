#include "dfecs/kpm.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "dfecs/error.hpp"

namespace dfecs {

KpmVector compute_kpm(const StandardizedFrame& neutral, const StandardizedFrame& frame) {
    if (neutral.subject_id != frame.subject_id) {
        throw Error(ErrorKind::SubjectMismatch,
                    "neutral frame of '" + neutral.subject_id + "' used for subject '" + frame.subject_id + "'");
    }
    KpmVector out;
    out.subject_id = frame.subject_id;
    out.frame_index = frame.frame_index;
    out.valid = neutral.validity & frame.validity;
    for (int i = 0; i < kNumKeypoints; ++i) {
        if (!out.valid[i]) continue;
        out.values(2 * i) = frame.coords(0, i) - neutral.coords(0, i);
        out.values(2 * i + 1) = frame.coords(1, i) - neutral.coords(1, i);
    }
    return out;
}

KpmMatrix build_matrix(const std::vector<KpmVector>& vectors, std::optional<SampleRequest> sample) {
    std::vector<std::size_t> picked(vectors.size());
    std::iota(picked.begin(), picked.end(), std::size_t{0});

    KpmMatrix out;
    if (sample) {
        if (sample->count > vectors.size()) {
            throw Error(ErrorKind::SampleTooLarge, "requested " + std::to_string(sample->count) + " samples from " +
                                                       std::to_string(vectors.size()) + " frames");
        }
        std::vector<std::size_t> chosen;
        chosen.reserve(sample->count);
        std::mt19937_64 rng(sample->seed);
        std::sample(picked.begin(), picked.end(), std::back_inserter(chosen), sample->count, rng);
        picked = std::move(chosen);
        out.sampled_count = sample->count;
        out.sample_seed = sample->seed;
    }

    out.data.resize(kKpmDim, static_cast<Eigen::Index>(picked.size()));
    out.columns.reserve(picked.size());
    for (std::size_t c = 0; c < picked.size(); ++c) {
        const KpmVector& v = vectors[picked[c]];
        out.data.col(static_cast<Eigen::Index>(c)) = v.values;
        out.columns.push_back({v.subject_id, v.frame_index, v.valid});
    }
    return out;
}

Eigen::MatrixXd extract_part(const Eigen::MatrixXd& data, FacePart part) {
    if (data.rows() != kKpmDim) throw Error(ErrorKind::ShapeError, "KPM data must have 136 rows");
    return data.middleRows(part_row_offset(part), part_dim(part));
}

KpmColumn expand_to_full(const Eigen::VectorXd& part_component, FacePart part) {
    if (part_component.size() != part_dim(part)) {
        throw Error(ErrorKind::ShapeError, "component length does not match part " + std::string(part_name(part)));
    }
    KpmColumn out = KpmColumn::Zero();
    out.segment(part_row_offset(part), part_dim(part)) = part_component;
    return out;
}

KpmAssembly assemble_kpms(const std::vector<StandardizedFrame>& frames) {
    // Subjects keep first-appearance order so the output does not depend on id sorting.
    std::vector<std::string> order;
    std::map<std::string, std::vector<const StandardizedFrame*>> by_subject;
    for (const StandardizedFrame& f : frames) {
        auto [it, inserted] = by_subject.try_emplace(f.subject_id);
        if (inserted) order.push_back(f.subject_id);
        it->second.push_back(&f);
    }

    KpmAssembly out;
    for (const std::string& subject : order) {
        const auto& subject_frames = by_subject[subject];
        const StandardizedFrame* neutral = nullptr;
        std::size_t neutral_count = 0;
        for (const StandardizedFrame* f : subject_frames) {
            if (!f->is_neutral) continue;
            ++neutral_count;
            if (neutral == nullptr || f->frame_index < neutral->frame_index) neutral = f;
        }
        if (neutral == nullptr) {
            out.excluded_subjects.push_back(subject);
            out.warnings.push_back("subject '" + subject + "' has no neutral frame; excluded");
            continue;
        }
        if (neutral_count > 1) {
            out.warnings.push_back("subject '" + subject + "' has " + std::to_string(neutral_count) +
                                   " neutral frames; using frame " + std::to_string(neutral->frame_index));
        }
        for (const StandardizedFrame* f : subject_frames) out.vectors.push_back(compute_kpm(*neutral, *f));
    }
    return out;
}

}  // namespace dfecs
