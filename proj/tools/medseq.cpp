// medseq: feature-augmented BiLSTM-CRF toolkit for drug-related entity
// recognition. Subcommands: gen, pretrain, train, predict, evaluate,
// gradcheck.

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "medseq/commands.hpp"
#include "medseq/errors.hpp"

namespace cmd = medseq::commands;

namespace {

std::string config_path;  // shared by all subcommands

void add_config_file(CLI::App* app) {
    app->add_option("--config", config_path,
                    "Key = value configuration file; flags win over the file");
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

// Expands `--config FILE` into `--key=value` tokens for every file entry whose
// option was not already given on the command line, so explicit flags always
// win over the file and the file wins over defaults.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;

    std::ifstream in(path);
    if (!in) throw medseq::ConfigError("cannot open config file: " + path);
    std::vector<std::string> expanded = args;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw medseq::ConfigError("config line " + std::to_string(line_no) +
                                      " is not 'key = value': " + line);
        }
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        while (!key.empty() && key.front() == '-') key.erase(key.begin());
        if (key.empty()) {
            throw medseq::ConfigError("config line " + std::to_string(line_no) +
                                      " has an empty key");
        }
        const std::string flag = "--" + key;
        bool given = false;
        for (const auto& arg : args) {
            if (arg == flag || arg.rfind(flag + "=", 0) == 0) given = true;
        }
        if (!given) expanded.push_back(flag + "=" + value);
    }
    return expanded;
}

void add_rate_option(CLI::App* app, medseq::SynthConfig& synth) {
    app->add_option_function<std::vector<std::string>>(
           "--rate",
           [&synth](const std::vector<std::string>& entries) {
               for (const auto& entry : entries) {
                   const auto eq = entry.find('=');
                   if (eq == std::string::npos) {
                       throw CLI::ValidationError("--rate expects CLASS=VALUE, got " + entry);
                   }
                   const auto cls = medseq::entity_class_from_string(entry.substr(0, eq));
                   synth.rates[static_cast<int>(cls)] = std::stod(entry.substr(eq + 1));
               }
           },
           "Mentions per document as CLASS=VALUE (repeatable); defaults follow "
           "the task's training-corpus statistics")
        ->take_all();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Drug-related entity recognition with a feature-augmented BiLSTM-CRF"};
    app.require_subcommand(1);
    add_config_file(&app);

    // gen
    cmd::GenOptions gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic labeled corpus");
    add_config_file(gen_cmd);
    gen_cmd->add_option("--out", gen.out_dir, "Output directory")->required();
    gen_cmd->add_option("--docs", gen.synth.documents, "Number of documents");
    gen_cmd->add_option("--seed", gen.synth.seed, "Random seed")->envname("MEDSEQ_SEED");
    gen_cmd->add_option("--tag-correlation", gen.synth.tag_correlation,
                        "Probability that Reason/ADE sidecar rows carry their informative tag");
    gen_cmd->add_flag("--ambiguous-conditions", gen.synth.ambiguous_conditions,
                      "Reason and ADE share surface forms; only the sidecar separates them");
    add_rate_option(gen_cmd, gen.synth);

    // pretrain
    cmd::PretrainOptions pretrain;
    CLI::App* pre_cmd =
        app.add_subcommand("pretrain", "Train skip-gram word embeddings on raw .txt files");
    add_config_file(pre_cmd);
    pre_cmd->add_option("--corpus", pretrain.corpus_dir, "Directory of .txt documents")
        ->required();
    pre_cmd->add_option("--out", pretrain.out_path, "Embeddings output file")->required();
    pre_cmd->add_option("--dim", pretrain.skipgram.dim, "Embedding dimension");
    pre_cmd->add_option("--window", pretrain.skipgram.window, "Context window");
    pre_cmd->add_option("--negatives", pretrain.skipgram.negatives, "Negative samples per pair");
    pre_cmd->add_option("--epochs", pretrain.skipgram.epochs, "Training epochs");
    pre_cmd->add_option("--lr", pretrain.skipgram.learning_rate, "Initial learning rate");
    pre_cmd->add_option("--min-count", pretrain.skipgram.min_count, "Vocabulary threshold");
    pre_cmd->add_option("--subsample", pretrain.skipgram.subsample,
                        "Frequent-word subsampling threshold");
    pre_cmd->add_option("--seed", pretrain.skipgram.seed, "Random seed")->envname("MEDSEQ_SEED");
    pre_cmd->add_option("--threads", pretrain.skipgram.threads,
                        "Worker threads; > 1 is non-deterministic");

    // train
    cmd::TrainOptions tr;
    CLI::App* train_cmd = app.add_subcommand("train", "Train the BiLSTM-CRF tagger");
    add_config_file(train_cmd);
    train_cmd->add_option("--train", tr.train_dir, "Directory of .txt/.ann training documents")
        ->required();
    train_cmd->add_option("--feat-dir", tr.feat_dir,
                          "Directory of .feat sidecars (defaults to --train)");
    train_cmd->add_option("--embeddings", tr.embeddings_path, "Pretrained embeddings file");
    train_cmd->add_flag("--random-init", tr.random_init, "Uniform-random word vectors");
    train_cmd->add_flag("--augment,!--no-augment", tr.augment,
                        "Concatenate semantic-tag embeddings onto word vectors");
    train_cmd->add_flag("--merged-tags", tr.merged_tags,
                        "Collapse the two tag streams into one merged stream");
    train_cmd->add_flag("--iob-mask", tr.iob_mask,
                        "Mask illegal IOB transitions in the saved CRF");
    train_cmd->add_option("--checkpoint", tr.checkpoint_out, "Checkpoint output file")
        ->required();
    train_cmd->add_option("--history", tr.history_out, "Per-epoch history JSON output");
    train_cmd->add_option("--word-dim", tr.model.word_dim, "Word embedding dimension");
    train_cmd->add_option("--clamp-dim", tr.model.clamp_dim, "CLAMP tag embedding dimension");
    train_cmd->add_option("--ctakes-dim", tr.model.ctakes_dim, "cTAKES tag embedding dimension");
    train_cmd->add_option("--merged-dim", tr.model.merged_dim, "Merged tag embedding dimension");
    train_cmd->add_option("--hidden-fraction", tr.model.hidden_fraction,
                          "Hidden units per direction as a fraction of the input size");
    CLI::Option* hidden_opt = train_cmd->add_option(
        "--hidden", "Explicit hidden units per direction (overrides the fraction)");
    train_cmd->add_option("--seed", tr.model.seed, "Model init seed")->envname("MEDSEQ_SEED");
    train_cmd->add_option("--lr", tr.trainer.learning_rate, "RMSProp learning rate");
    train_cmd->add_option("--rho", tr.trainer.rho, "RMSProp decay");
    train_cmd->add_option("--batch", tr.trainer.batch_size, "Batch size");
    train_cmd->add_option("--patience", tr.trainer.patience, "Early-stopping patience (epochs)");
    train_cmd->add_option("--val-fraction", tr.trainer.validation_fraction,
                          "Validation split fraction");
    train_cmd->add_option("--max-epochs", tr.trainer.max_epochs, "Epoch cap");
    train_cmd->add_option("--shuffle-seed", tr.trainer.shuffle_seed, "Split/shuffle seed");
    CLI::Option* clip_opt = train_cmd->add_option("--clip-norm", "Global gradient norm clip");
    train_cmd->add_option("--threads", tr.trainer.threads,
                          "Batch-parallel gradient threads (deterministic per thread count)");

    // predict
    cmd::PredictOptions pred;
    CLI::App* pred_cmd = app.add_subcommand("predict", "Write .ann predictions for .txt inputs");
    add_config_file(pred_cmd);
    pred_cmd->add_option("--checkpoint", pred.checkpoint, "Trained checkpoint")->required();
    pred_cmd->add_option("--in", pred.in_dir, "Directory of .txt documents")->required();
    pred_cmd->add_option("--feat-dir", pred.feat_dir, "Directory of .feat sidecars");
    pred_cmd->add_option("--out", pred.out_dir, "Output directory")->required();

    // evaluate
    cmd::EvaluateOptions ev;
    CLI::App* eval_cmd =
        app.add_subcommand("evaluate", "Strict/lenient span scoring plus token confusion");
    add_config_file(eval_cmd);
    eval_cmd->add_option("--gold", ev.gold_dir, "Gold directory (.txt + .ann)")->required();
    eval_cmd->add_option("--pred", ev.pred_dir, "Prediction directory (.ann)")->required();
    eval_cmd->add_option("--report", ev.report_out, "Machine-readable report output");
    eval_cmd->add_flag("--bipartite", ev.bipartite,
                       "Maximum bipartite matching instead of greedy first-overlap");

    // gradcheck
    cmd::GradcheckOptions gc;
    CLI::App* gc_cmd =
        app.add_subcommand("gradcheck", "Run the CRF and BPTT finite-difference oracles");
    add_config_file(gc_cmd);
    gc_cmd->add_option("--seed", gc.seed, "Random seed")->envname("MEDSEQ_SEED");
    gc_cmd->add_option("--instances", gc.instances, "Full-model instances to check");
    gc_cmd->add_option("--epsilon", gc.epsilon, "Central-difference step")
        ->check(CLI::Range(1e-6, 1e-4));

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_config(args);
        std::reverse(args.begin(), args.end());  // CLI11 consumes back to front
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return cmd::kUsageError;
    } catch (const medseq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return cmd::kUsageError;
    }

    try {
        if (gen_cmd->parsed()) {
            cmd::run_gen(gen);
        } else if (pre_cmd->parsed()) {
            cmd::run_pretrain(pretrain);
        } else if (train_cmd->parsed()) {
            if (hidden_opt->count() > 0) tr.model.hidden_override = hidden_opt->as<int>();
            if (clip_opt->count() > 0) tr.trainer.clip_norm = clip_opt->as<double>();
            cmd::run_train(tr);
        } else if (pred_cmd->parsed()) {
            cmd::run_predict(pred);
        } else if (eval_cmd->parsed()) {
            cmd::run_evaluate(ev);
        } else if (gc_cmd->parsed()) {
            cmd::run_gradcheck(gc);
        }
    } catch (const medseq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return cmd::kUsageError;
    } catch (const medseq::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return cmd::kDivergence;
    } catch (const medseq::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cmd::kDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cmd::kDataError;
    }
    return cmd::kOk;
}
