#include "mvr/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace mvr {

namespace {

void add_view(std::vector<TensorView>& out, VecX<float>& v) {
    out.push_back({v.data(), static_cast<std::size_t>(v.size())});
}

void add_view(std::vector<TensorView>& out, MatX<float>& m) {
    out.push_back({m.data(), static_cast<std::size_t>(m.size())});
}

// One batch cloud's transient state across the forward/loss/backward phases.
struct CloudWork {
    const CloudTrainData* cloud = nullptr;
    std::vector<StudentTape<float>> tapes;       // per view
    std::vector<MatXf> student_agg;              // per view, tokens×C
    FusedPointFeatures fused;
    MatXd dstudent;                              // fused mode: N×C
    std::vector<MatXd> dtokens_per_view;         // per-view mode
};

std::string checkpoint_name(long step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "checkpoint_%06ld.mvrw", step);
    return buf;
}

}  // namespace

std::vector<TensorView> student_tensor_views(StudentParams<float>& params) {
    std::vector<TensorView> out;
    add_view(out, params.bottleneck.fc1_w);
    add_view(out, params.bottleneck.fc1_b);
    add_view(out, params.bottleneck.fc2_w);
    add_view(out, params.bottleneck.fc2_b);
    for (auto& blk : params.blocks) {
        add_view(out, blk.norm1_w);
        add_view(out, blk.norm1_b);
        add_view(out, blk.attn.qkv_w);
        add_view(out, blk.attn.qkv_b);
        add_view(out, blk.attn.proj_w);
        add_view(out, blk.attn.proj_b);
        add_view(out, blk.norm2_w);
        add_view(out, blk.norm2_b);
        add_view(out, blk.mlp.fc1_w);
        add_view(out, blk.mlp.fc1_b);
        add_view(out, blk.mlp.fc2_w);
        add_view(out, blk.mlp.fc2_b);
    }
    return out;
}

TrainResult train_student(const WeightArchive& init, const EncoderConfig& enc,
                          int render_resolution, const LossConfig& loss_cfg,
                          const OptimizerConfig& opt_cfg, const TrainConfig& train_cfg,
                          const std::vector<CloudTrainData>& clouds) {
    enc.validate();
    loss_cfg.validate();
    opt_cfg.validate();
    train_cfg.validate();
    if (clouds.empty()) throw ConfigError("training: at least one training cloud is required");
    if (render_resolution % enc.image_size != 0) {
        throw ConfigError("training: render resolution must be a multiple of the input size");
    }
    const int scale = render_resolution / enc.image_size;
    const int grid = enc.grid_size();
    const int j_maps = enc.taps();
    for (const CloudTrainData& cloud : clouds) {
        if (cloud.n_points < 1) throw ConfigError("training: cloud without points");
        if (cloud.teacher_tokens.empty() ||
            cloud.teacher_tokens.size() != cloud.correspondences.size()) {
            throw ConfigError("training: per-view teacher features and correspondences differ");
        }
        for (const MatXf& t : cloud.teacher_tokens) {
            if (t.rows() != enc.tokens() || t.cols() != enc.embed_dim) {
                throw ConfigError("training: teacher token grid does not match config");
            }
        }
    }

    StudentParams<float> student = student_params_from_archive(init, enc);
    const std::vector<TensorView> param_views = student_tensor_views(student);
    StudentParams<float> grads = zero_student<float>(enc);
    const std::vector<TensorView> grad_views = student_tensor_views(grads);
    std::vector<ConstTensorView> grad_cviews;
    for (const TensorView& g : grad_views) grad_cviews.push_back({g.data, g.size});
    OptimizerState opt_state;
    opt_state.init(param_views);

    RandomStream rng(train_cfg.seed);
    std::ofstream log;
    if (!train_cfg.log_path.empty()) {
        log.open(train_cfg.log_path, std::ios::trunc);
        if (!log) throw DataError("training: cannot open log '" + train_cfg.log_path + "'");
        log << std::setprecision(17) << "step,loss,lr,wall_ms\n";
    }

    const auto snapshot = [&](const std::string& name) {
        WeightArchive archive = init;
        write_student_params(archive, student, enc);
        save_weights(train_cfg.checkpoint_dir + "/" + name, archive);
    };

    TrainResult result;
    std::vector<std::size_t> order(clouds.size());
    for (int step = 1; step <= train_cfg.iterations; ++step) {
        const auto wall_start = std::chrono::steady_clock::now();
        // Sample the batch: a deterministic partial shuffle.
        std::iota(order.begin(), order.end(), std::size_t{0});
        const std::size_t batch =
            std::min(static_cast<std::size_t>(train_cfg.batch_size), clouds.size());
        for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t pick = b + rng.index(order.size() - b);
            std::swap(order[b], order[pick]);
        }

        // Forward every view of every batch cloud; keep tapes for backward.
        std::vector<CloudWork> work(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            CloudWork& cw = work[b];
            cw.cloud = &clouds[order[b]];
            const std::size_t n_views = cw.cloud->teacher_tokens.size();
            cw.tapes.resize(n_views);
            cw.student_agg.resize(n_views);
            parallel_for(n_views, [&](std::size_t v) {
                const auto maps = student_forward<float>(cw.cloud->teacher_tokens[v], student,
                                                         enc.heads, &cw.tapes[v]);
                cw.student_agg[v] = aggregate_layers(maps);
            });
            std::vector<ViewFeatureSource<float>> sources(n_views);
            for (std::size_t v = 0; v < n_views; ++v) {
                sources[v] = {&cw.cloud->teacher_tokens[v], &cw.student_agg[v],
                              &cw.cloud->correspondences[v]};
            }
            cw.fused =
                fuse_views(sources, cw.cloud->n_points, grid, enc.image_size, scale);
        }

        // Loss and its gradient, with the hard-mining pool spanning the batch.
        double step_loss = 0.0;
        try {
            if (!loss_cfg.per_view) {
                std::vector<double> pool;
                for (const CloudWork& cw : work) {
                    for (Eigen::Index i = 0; i < cw.fused.teacher.rows(); ++i) {
                        if (cw.fused.visibility[static_cast<std::size_t>(i)] == 0) continue;
                        const VecX<double> t = cw.fused.teacher.row(i).transpose();
                        const VecX<double> s = cw.fused.student.row(i).transpose();
                        pool.push_back(cosine_distance<double>(t, s));
                    }
                }
                if (pool.empty()) {
                    throw NumericError("training: no visible points in the batch");
                }
                const std::vector<char> mask = hard_mining_select(pool, loss_cfg.k_pct);
                std::size_t offset = 0;
                for (CloudWork& cw : work) {
                    std::vector<Eigen::Index> visible;
                    for (Eigen::Index i = 0; i < cw.fused.teacher.rows(); ++i) {
                        if (cw.fused.visibility[static_cast<std::size_t>(i)] > 0) {
                            visible.push_back(i);
                        }
                    }
                    MatXd tvis(static_cast<Eigen::Index>(visible.size()),
                               cw.fused.teacher.cols());
                    MatXd svis(tvis.rows(), tvis.cols());
                    std::vector<char> mask_slice(visible.size());
                    for (std::size_t r = 0; r < visible.size(); ++r) {
                        tvis.row(static_cast<Eigen::Index>(r)) =
                            cw.fused.teacher.row(visible[r]);
                        svis.row(static_cast<Eigen::Index>(r)) =
                            cw.fused.student.row(visible[r]);
                        mask_slice[r] = mask[offset + r];
                    }
                    offset += visible.size();
                    const auto [cloud_loss, gvis] = global_cosine_loss<double>(
                        tvis, svis, mask_slice, loss_cfg.shrink_factor);
                    step_loss += cloud_loss / static_cast<double>(batch);
                    cw.dstudent =
                        MatXd::Zero(cw.fused.student.rows(), cw.fused.student.cols());
                    for (std::size_t r = 0; r < visible.size(); ++r) {
                        cw.dstudent.row(visible[r]) =
                            gvis.row(static_cast<Eigen::Index>(r)) /
                            static_cast<double>(batch);
                    }
                }
            } else {
                // Per-view mode: each view's aggregated token map is one
                // sample; the mining pool is every token of every view.
                std::vector<double> pool;
                std::size_t total_maps = 0;
                for (const CloudWork& cw : work) {
                    total_maps += cw.student_agg.size();
                    for (std::size_t v = 0; v < cw.student_agg.size(); ++v) {
                        const MatXd t = cw.cloud->teacher_tokens[v].cast<double>();
                        const MatXd s = cw.student_agg[v].cast<double>();
                        for (Eigen::Index r = 0; r < t.rows(); ++r) {
                            const VecX<double> tr = t.row(r).transpose();
                            const VecX<double> sr = s.row(r).transpose();
                            pool.push_back(cosine_distance<double>(tr, sr));
                        }
                    }
                }
                const std::vector<char> mask = hard_mining_select(pool, loss_cfg.k_pct);
                std::size_t offset = 0;
                for (CloudWork& cw : work) {
                    cw.dtokens_per_view.resize(cw.student_agg.size());
                    for (std::size_t v = 0; v < cw.student_agg.size(); ++v) {
                        const MatXd t = cw.cloud->teacher_tokens[v].cast<double>();
                        const MatXd s = cw.student_agg[v].cast<double>();
                        std::vector<char> mask_slice(
                            mask.begin() + static_cast<std::ptrdiff_t>(offset),
                            mask.begin() + static_cast<std::ptrdiff_t>(offset + t.rows()));
                        offset += static_cast<std::size_t>(t.rows());
                        const auto [view_loss, gtokens] = global_cosine_loss<double>(
                            t, s, mask_slice, loss_cfg.shrink_factor);
                        step_loss += view_loss / static_cast<double>(total_maps);
                        cw.dtokens_per_view[v] = gtokens / static_cast<double>(total_maps);
                    }
                }
            }
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " (step " + std::to_string(step) + ")");
        }
        if (!std::isfinite(step_loss)) {
            throw NumericError("training: non-finite loss at step " + std::to_string(step));
        }

        // Backward in fixed batch/view order; gradients accumulate serially.
        for (const TensorView& g : grad_views) std::fill(g.data, g.data + g.size, 0.0f);
        for (CloudWork& cw : work) {
            const std::size_t n_views = cw.student_agg.size();
            for (std::size_t v = 0; v < n_views; ++v) {
                MatXd dtokens = MatXd::Zero(enc.tokens(), enc.embed_dim);
                if (!loss_cfg.per_view) {
                    scatter_point_gradients(cw.dstudent, cw.fused.visibility,
                                            cw.cloud->correspondences[v], grid, enc.image_size,
                                            scale, dtokens);
                } else {
                    dtokens = cw.dtokens_per_view[v];
                }
                // Aggregation backward: each decoder map receives 1/j.
                const MatXf dagg = (dtokens / static_cast<double>(j_maps)).cast<float>();
                const std::vector<MatXf> dmaps(static_cast<std::size_t>(j_maps), dagg);
                student_backward<float>(dmaps, student, enc.heads, cw.tapes[v], grads);
                cw.tapes[v] = StudentTape<float>{};  // release before the next view
            }
        }

        stable_adamw_step(param_views, grad_cviews, opt_state, opt_cfg);

        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                      wall_start)
                .count();
        result.step_losses.push_back(step_loss);
        if (log) {
            log << step << ',' << step_loss << ',' << opt_cfg.lr << ',' << wall_ms << '\n';
            log.flush();
        }
        if (!train_cfg.checkpoint_dir.empty() && train_cfg.checkpoint_every > 0 &&
            step % train_cfg.checkpoint_every == 0) {
            snapshot(checkpoint_name(step));
        }
    }

    result.checkpoint = init;
    write_student_params(result.checkpoint, student, enc);
    if (!train_cfg.checkpoint_dir.empty()) {
        save_weights(train_cfg.checkpoint_dir + "/final.mvrw", result.checkpoint);
    }
    return result;
}

}  // namespace mvr
