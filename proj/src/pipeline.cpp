#include "dfecs/pipeline.hpp"

#include "dfecs/error.hpp"

namespace dfecs {

namespace {

const RawFrame& find_reference(const std::vector<RawFrame>& frames, const std::optional<std::string>& subject) {
    if (frames.empty()) throw Error(ErrorKind::SchemaError, "no frames to standardize");
    const std::string& wanted = subject ? *subject : frames.front().subject_id;
    const RawFrame* best = nullptr;
    for (const RawFrame& f : frames) {
        if (f.subject_id != wanted || !f.is_neutral) continue;
        if (best == nullptr || f.frame_index < best->frame_index) best = &f;
    }
    if (best == nullptr) {
        throw Error(ErrorKind::SchemaError, "reference subject '" + wanted + "' has no neutral frame");
    }
    return *best;
}

}  // namespace

StandardizedDataset standardize_dataset(const std::vector<RawFrame>& frames, const StandardizeOptions& options) {
    StandardizedDataset out;
    if (options.already_standardized) {
        if (options.fixed_template) {
            out.face_template = *options.fixed_template;
        } else {
            const RawFrame& ref = find_reference(frames, options.reference_subject);
            out.face_template.coords = ref.coords;
            out.face_template.validity = ref.validity;
        }
        for (const RawFrame& f : frames) {
            StandardizedFrame s;
            s.subject_id = f.subject_id;
            s.frame_index = f.frame_index;
            s.is_neutral = f.is_neutral;
            s.coords = f.coords;
            s.validity = f.validity;
            out.frames.push_back(std::move(s));
        }
        return out;
    }

    const RawFrame* reference = nullptr;
    if (options.fixed_template) {
        out.face_template = *options.fixed_template;
    } else {
        reference = &find_reference(frames, options.reference_subject);
        RawFrame ref = *reference;
        if (options.frontalize) ref.coords = options.frontalize(ref.coords);
        out.face_template = make_template(ref, options.anchors, options.template_scale);
    }

    StandardizeConfig config;
    config.anchors = options.anchors;
    config.frontalize = options.frontalize;
    out.frames.reserve(frames.size());
    for (const RawFrame& f : frames) {
        try {
            StandardizedFrame s = standardize_frame(f, out.face_template, config);
            for (const std::string& w : s.warnings) {
                out.warnings.push_back(f.subject_id + "/" + std::to_string(f.frame_index) + ": " + w);
            }
            out.frames.push_back(std::move(s));
        } catch (const Error& e) {
            if (&f == reference) throw;
            out.warnings.push_back(f.subject_id + "/" + std::to_string(f.frame_index) + ": dropped (" + e.what() + ")");
        }
    }
    return out;
}

PreparedKpms prepare_kpms(const std::vector<RawFrame>& frames, const StandardizeOptions& options,
                          std::optional<SampleRequest> sample) {
    StandardizedDataset ds = standardize_dataset(frames, options);
    KpmAssembly assembly = assemble_kpms(ds.frames);
    PreparedKpms out;
    out.face_template = std::move(ds.face_template);
    out.warnings = std::move(ds.warnings);
    out.warnings.insert(out.warnings.end(), assembly.warnings.begin(), assembly.warnings.end());
    if (assembly.vectors.empty()) throw Error(ErrorKind::ZeroData, "no keypoint-motion vectors could be formed");
    out.matrix = build_matrix(assembly.vectors, sample);
    return out;
}

}  // namespace dfecs
