/* hmsr - heterogeneous mixture-of-experts super-resolution, C API.
 *
 * All functions return HMSR_OK on success. On failure they return
 * HMSR_ERR_CONFIG (bad arguments or configuration) or HMSR_ERR_RUNTIME
 * (IO / numeric failure) and leave a message in hmsr_last_error().
 * The two error values double as process exit codes in the CLI.
 */
#ifndef HMSR_H
#define HMSR_H

#ifdef __cplusplus
extern "C" {
#endif

#define HMSR_OK 0
#define HMSR_ERR_CONFIG 1
#define HMSR_ERR_RUNTIME 2

const char* hmsr_version(void);

/* Message for the most recent failure on the calling thread. Valid until
 * the next hmsr_* call on the same thread. */
const char* hmsr_last_error(void);

/* Deterministic stratified train/test split of an image directory tree.
 * ratio_train:ratio_test (e.g. 3:1). Writes train.txt, test.txt and
 * split_meta.json into out_dir. train_count/test_count may be NULL. */
int hmsr_prepare_data(const char* root, int ratio_train, int ratio_test,
                      unsigned long long seed, const char* out_dir,
                      long long* train_count, long long* test_count);

/* Trains according to a JSON config file. overrides_json is an optional
 * JSON object of dotted keys applied on top of the file, e.g.
 * {"train.seed": 7, "train.deterministic": true}; pass NULL for none.
 * Checkpoints and logs land in out_dir; an existing ckpt_latest.bin is
 * resumed when the config says train.resume == "auto". */
int hmsr_train(const char* config_path, const char* out_dir, const char* overrides_json);

/* Opaque handle for a model loaded from a checkpoint. */
typedef struct hmsr_model hmsr_model;

hmsr_model* hmsr_model_open(const char* checkpoint_path);
void hmsr_model_close(hmsr_model* model);

/* Upsampling factor baked into the checkpoint (2 or 4). */
int hmsr_model_scale(const hmsr_model* model);

/* Resolved config of the checkpoint as JSON; owned by the handle. */
const char* hmsr_model_config_json(const hmsr_model* model);

/* Evaluates PSNR/SSIM over the HR images listed in test_manifest (one path
 * per line). expected_scale must match the checkpoint scale, or pass -1 to
 * accept it. border < 0 uses the scale factor. Writes report.json and
 * report.txt into out_dir. */
int hmsr_eval(hmsr_model* model, const char* test_manifest, int expected_scale, int border,
              const char* out_dir);

/* Super-resolves one image file into a PNG. */
int hmsr_infer(hmsr_model* model, const char* image_in, const char* image_out);

/* Buffer-level inference: lr is h*w*3 interleaved RGB in [0,1]; sr must
 * hold (s*h)*(s*w)*3 floats where s is the model scale. */
int hmsr_infer_buffer(hmsr_model* model, const float* lr, int h, int w, float* sr);

/* Runs the routers on one image and writes expert_ids.png,
 * expert_ids_color.png and routing_meta.json into out_dir. */
int hmsr_viz_routing(hmsr_model* model, const char* image_in, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* HMSR_H */
