#include <gtest/gtest.h>

#include "generators.hpp"
#include "json.hpp"
#include "probekit/digest.hpp"
#include "probekit/labels.hpp"

using namespace probekit;

namespace {

const std::string kFixtures = PROBEKIT_FIXTURE_DIR;

ssf::SsfSentence sentence_of(const std::string& body) {
  return ssf::parse_document("<Sentence id='x'>\n" + body + "</Sentence>\n").sentences.at(0);
}

// NP chunk with one word, attached by `drel`.
std::string np(int k, const std::string& name, const std::string& drel, const std::string& word,
               const std::string& tag, const std::string& af) {
  const std::string idx = std::to_string(k);
  return idx + "\t((\tNP\t<fs name='" + name + "' drel='" + drel + "'>\n" + idx + ".1\t" + word +
         "\t" + tag + "\t<fs af='" + af + "'>\n\t))\t\t\n";
}

std::string vgf(int k, const std::string& af) {
  const std::string idx = std::to_string(k);
  return idx + "\t((\tVGF\t<fs name='VGF'>\n" + idx + ".1\tgayA\tVM\t<fs af='" + af +
         "'>\n\t))\t\t\n";
}

ssf::SsfSentence with_words(size_t n) {
  ssf::SsfSentence s;
  s.id = "n";
  ssf::Chunk c;
  c.chunk_tag = "NP";
  for (size_t i = 0; i < n; ++i) {
    ssf::WordNode w;
    w.address = {1, static_cast<int>(i + 1)};
    w.surface = "w" + std::to_string(i);
    w.pos_tag = "NN";
    c.words.push_back(w);
  }
  if (n > 0) s.chunks.push_back(c);
  return s;
}

ssf::SsfSentence chain(int n) {
  ssf::SsfSentence s;
  s.id = "chain";
  for (int i = 1; i <= n; ++i) {
    ssf::Chunk c;
    c.index = i;
    c.chunk_tag = "NP";
    c.features.extra["name"] = "C" + std::to_string(i);
    if (i > 1) c.features.extra["drel"] = "r6:C" + std::to_string(i - 1);
    ssf::WordNode w;
    w.address = {i, 1};
    w.surface = "w";
    w.pos_tag = "NN";
    c.words.push_back(w);
    s.chunks.push_back(c);
  }
  return s;
}

const ExtractorConfig kHindi;

}  // namespace

TEST(Bins, TableOneLabels) {
  EXPECT_EQ(class_count(TaskKind::kSentLen), 8u);
  EXPECT_EQ(class_count(TaskKind::kTreeDepth), 5u);
  EXPECT_EQ(class_count(TaskKind::kBShift), 2u);
  EXPECT_EQ(class_count(TaskKind::kSubjNum), 2u);
  EXPECT_EQ(class_count(TaskKind::kObjNum), 2u);
  EXPECT_EQ(class_count(TaskKind::kVerbGen), 4u);
  EXPECT_EQ(class_count(TaskKind::kVerbNum), 3u);
  EXPECT_EQ(class_count(TaskKind::kVerbPer), 7u);
  EXPECT_EQ(label_names(TaskKind::kSentLen).back(), "(29-32)");
  EXPECT_EQ(label_names(TaskKind::kTreeDepth).back(), "(12-20)");
  EXPECT_EQ(label_names(TaskKind::kVerbPer)[4], "2nd person honorific");
}

TEST(Bins, TotalityOverSweep) {
  for (const BinSpec* spec : {&sentlen_bins(), &treedepth_bins()}) {
    for (long long v = 0; v <= 40; ++v) {
      int matches = 0;
      for (const auto& [lo, hi] : spec->ranges) matches += (v >= lo && v <= hi);
      const bool in_domain = v >= spec->domain_min() && v <= spec->domain_max();
      EXPECT_EQ(matches, in_domain ? 1 : 0) << v;
      EXPECT_EQ(spec->bin_of(v).has_value(), in_domain) << v;
    }
    for (size_t i = 1; i < spec->ranges.size(); ++i) {
      EXPECT_EQ(spec->ranges[i].first, spec->ranges[i - 1].second + 1);
    }
  }
}

TEST(SentLen, Bins) {
  EXPECT_EQ(sentlen_bins().bin_of(7), 1);
  EXPECT_EQ(sentlen_bins().bin_of(0), 0);
  EXPECT_FALSE(sentlen_bins().bin_of(33).has_value());
  const Extraction seven = extract_sentlen(with_words(7), kHindi, "a");
  ASSERT_TRUE(seven.example);
  EXPECT_EQ(seven.example->label, 1);
  EXPECT_EQ(seven.example->label_name, "(6-8)");
  EXPECT_FALSE(extract_sentlen(with_words(33), kHindi, "a").example);
  EXPECT_EQ(extract_sentlen(with_words(33), kHindi, "a").skip_reason, "length out of range");
  EXPECT_TRUE(extract_sentlen(with_words(32), kHindi, "a").example);
}

TEST(TreeDepth, RootOnlyAndChain) {
  EXPECT_EQ(tree_depth(chain(1)), 1);
  const Extraction one = extract_treedepth(chain(1), kHindi, "a");
  ASSERT_TRUE(one.example);
  EXPECT_EQ(one.example->label, 0);
  EXPECT_EQ(tree_depth(chain(4)), 4);
  EXPECT_EQ(extract_treedepth(chain(4), kHindi, "a").example->label, 1);
  EXPECT_EQ(tree_depth(chain(20)), 20);
  EXPECT_TRUE(extract_treedepth(chain(20), kHindi, "a").example);
  EXPECT_EQ(extract_treedepth(chain(21), kHindi, "a").skip_reason, "depth out of range");
}

TEST(TreeDepth, FixtureSentenceTwo) {
  const ssf::SsfDocument doc =
      ssf::parse_document(read_file(kFixtures + "/hi_sample.ssf"), "hi_sample.ssf");
  const ssf::SsfSentence& s2 = doc.sentences[1];
  // Hand count: VGF, NP6, NP5, NP4, NP3, NP2, NP.
  EXPECT_EQ(tree_depth(s2), 7);
  const Extraction e = extract_treedepth(s2, kHindi, "a");
  EXPECT_EQ(e.example->label, 2);
  EXPECT_EQ(e.example->label_name, "(6-8)");
}

TEST(TreeDepth, FailuresBecomeSkipReasons) {
  ssf::SsfSentence cyc = chain(2);
  cyc.chunks[0].features.extra["drel"] = "r6:C2";
  EXPECT_EQ(extract_treedepth(cyc, kHindi, "a").skip_reason, "CycleDetected");
  ssf::SsfSentence two = chain(2);
  two.chunks[1].features.extra.erase("drel");
  EXPECT_EQ(extract_treedepth(two, kHindi, "a").skip_reason, "MultipleRoots");
}

TEST(TreeDepth, MatchesRecursiveOracle) {
  for (const char* name : {"hi_sample.ssf", "hi_bins.ssf", "ml_sample.ssf"}) {
    const ssf::SsfDocument doc = ssf::parse_document(read_file(kFixtures + "/" + name));
    for (const auto& s : doc.sentences) EXPECT_EQ(tree_depth(s), gen::recursive_depth(s)) << s.id;
  }
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const auto s = gen::random_sentence(rng, "r", {12, 2});
    EXPECT_EQ(tree_depth(s), gen::recursive_depth(s));
  }
}

TEST(ArgNumber, PosTagsDecide) {
  const auto s = sentence_of(np(1, "NP", "k1:VGF", "ram", "NN", "ram,n,m,,3,d,0,0") +
                             np(2, "NP2", "k2:VGF", "phal", "NNS", "phal,n,m,,3,d,0,0") +
                             vgf(3, "jA,v,m,sg,3,,yA,yA"));
  const Extraction subj = extract_arg_number(s, ArgRole::kSubject, kHindi, "a");
  ASSERT_TRUE(subj.example);
  EXPECT_EQ(subj.example->task, TaskKind::kSubjNum);
  EXPECT_EQ(subj.example->label, 0);
  const Extraction obj = extract_arg_number(s, ArgRole::kObject, kHindi, "a");
  ASSERT_TRUE(obj.example);
  EXPECT_EQ(obj.example->label, 1);
  EXPECT_EQ(obj.example->label_name, "plural");
}

TEST(ArgNumber, MorphologyFallbackAndConflict) {
  const auto morph = sentence_of(np(1, "NP", "k1:VGF", "rAma", "NNP", "rAma,n,m,pl,3,d,0,0") +
                                 vgf(2, "jA,v,m,sg,3,,yA,yA"));
  EXPECT_EQ(extract_arg_number(morph, ArgRole::kSubject, kHindi, "a").example->label, 1);
  const auto conflict = sentence_of(np(1, "NP", "k1:VGF", "log", "NN", "log,n,m,pl,3,d,0,0") +
                                    vgf(2, "jA,v,m,pl,3,,yA,yA"));
  EXPECT_EQ(extract_arg_number(conflict, ArgRole::kSubject, kHindi, "a").skip_reason,
            "conflicting number evidence");
  const auto none = sentence_of(np(1, "NP", "k1:VGF", "rAma", "NNP", "rAma,n,m,,3,d,0,0") +
                                vgf(2, "jA,v,m,sg,3,,yA,yA"));
  EXPECT_EQ(extract_arg_number(none, ArgRole::kSubject, kHindi, "a").skip_reason,
            "no number evidence");
}

TEST(ArgNumber, Absences) {
  const auto s = sentence_of(np(1, "NP", "k1:VGF", "vah", "PRP", "vah,pn,m,sg,3,d,0,0") +
                             vgf(2, "jA,v,m,sg,3,,yA,yA"));
  EXPECT_EQ(extract_arg_number(s, ArgRole::kObject, kHindi, "a").skip_reason, "no k2 chunk");
  EXPECT_EQ(extract_arg_number(s, ArgRole::kSubject, kHindi, "a").skip_reason,
            "head is not a noun");
  const auto no_verb = sentence_of(np(1, "NP", "k1:NP2", "ram", "NN", "") +
                                   np(2, "NP2", "root:0", "ghar", "NN", ""));
  EXPECT_EQ(extract_arg_number(no_verb, ArgRole::kSubject, kHindi, "a").skip_reason,
            "no main verb chunk");
  // A k1 attached to a non-main verb does not count.
  const auto elsewhere = sentence_of(np(1, "NP", "k1:NP2", "ram", "NN", "") +
                                     np(2, "NP2", "k2:VGF", "ghar", "NN", "") +
                                     vgf(3, "jA,v,m,sg,3,,yA,yA"));
  EXPECT_EQ(extract_arg_number(elsewhere, ArgRole::kSubject, kHindi, "a").skip_reason,
            "no k1 chunk");
}

TEST(ArgNumber, ConfigurableRelations) {
  ExtractorConfig cfg;
  cfg.subject_relation = "nsubj";
  const auto s = sentence_of(np(1, "NP", "nsubj:VGF", "ram", "NN", "") +
                             vgf(2, "jA,v,m,sg,3,,yA,yA"));
  EXPECT_TRUE(extract_arg_number(s, ArgRole::kSubject, cfg, "a").example);
  EXPECT_FALSE(extract_arg_number(s, ArgRole::kSubject, kHindi, "a").example);
}

TEST(VerbFeature, TableOneMapping) {
  auto label = [](const std::string& af, VerbFeature f) {
    const auto s = sentence_of(np(1, "NP", "k1:VGF", "ram", "NN", "") + vgf(2, af));
    return extract_verb_feature(s, f, kHindi, "a");
  };
  EXPECT_EQ(label("jA,v,m,sg,3,,yA,yA", VerbFeature::kGender).example->label_name, "masculine");
  EXPECT_EQ(label("jA,v,f,sg,3,,yA,yA", VerbFeature::kGender).example->label, 1);
  EXPECT_EQ(label("jA,v,any,sg,3,,yA,yA", VerbFeature::kGender).example->label, 3);
  EXPECT_EQ(label("jA,v,m,pl,3,,yA,yA", VerbFeature::kNumber).example->label_name, "plural");
  EXPECT_EQ(label("jA,v,m,any,3,,yA,yA", VerbFeature::kNumber).example->label, 2);
  EXPECT_EQ(label("jA,v,m,sg,2h,,yA,yA", VerbFeature::kPerson).example->label_name,
            "2nd person honorific");
  EXPECT_EQ(label("jA,v,m,sg,1h,,yA,yA", VerbFeature::kPerson).example->label, 3);
  EXPECT_EQ(label("jA,v,m,sg,any,,yA,yA", VerbFeature::kPerson).example->label, 6);
  EXPECT_EQ(label("jA,v,,sg,3,,yA,yA", VerbFeature::kGender).skip_reason, "empty morph slot");
  EXPECT_EQ(label("jA,v,x,sg,3,,yA,yA", VerbFeature::kGender).skip_reason,
            "UnknownFeatureValue:x");
}

TEST(VerbFeature, NoVerbChunkAndLanguages) {
  const auto s = sentence_of(np(1, "NP", "root:0", "ram", "NN", ""));
  EXPECT_EQ(extract_verb_feature(s, VerbFeature::kGender, kHindi, "a").skip_reason,
            "no main verb chunk");
  const auto nm = sentence_of(np(1, "NP", "k1:VGF", "ram", "NN", "") +
                              vgf(2, "hog,v,nm,sg,3,,0,0"));
  ExtractorConfig kn;
  kn.language = "kn";
  EXPECT_EQ(extract_verb_feature(nm, VerbFeature::kGender, kn, "a").example->label_name,
            "neutral");
  EXPECT_FALSE(extract_verb_feature(nm, VerbFeature::kGender, kHindi, "a").example);
  ExtractorConfig ml;
  ml.language = "ml";
  EXPECT_FALSE(extract_verb_feature(nm, VerbFeature::kNumber, ml, "a").example);
}

TEST(BShift, TwoTokenSwap) {
  ExtractorConfig always = kHindi;
  always.bshift_probability = 1.0;
  const std::vector<BShiftInput> corpus = {{"s", {{"a", "X"}, {"b", "Y"}}}};
  const BShiftResult r = generate_bshift(corpus, 3, always);
  ASSERT_EQ(r.examples.size(), 1u);
  const TokenSentence expected = {{"b", "Y"}, {"a", "X"}};
  EXPECT_EQ(r.examples[0].tokens, expected);
  EXPECT_EQ(r.examples[0].label, 1);
  ExtractorConfig never = kHindi;
  never.bshift_probability = 0.0;
  const BShiftResult n = generate_bshift(corpus, 3, never);
  EXPECT_EQ(n.examples[0].tokens, corpus[0].tokens);
  EXPECT_EQ(n.examples[0].label, 0);
}

TEST(BShift, TooShortIsSkipped) {
  const std::vector<BShiftInput> corpus = {{"one", {{"a", "X"}}}, {"two", {{"a", "X"}, {"b", "Y"}}}};
  const BShiftResult r = generate_bshift(corpus, 0, kHindi);
  EXPECT_EQ(r.too_short, std::vector<std::string>{"one"});
  EXPECT_EQ(r.examples.size(), 1u);
}

TEST(BShift, EditProperty) {
  Rng rng(99);
  std::vector<BShiftInput> corpus;
  for (int i = 0; i < 2000; ++i) {
    corpus.push_back({"s" + std::to_string(i), gen::random_tokens(rng, 2, 20)});
  }
  const BShiftResult r = generate_bshift(corpus, 42, kHindi);
  ASSERT_EQ(r.examples.size(), corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    const TokenSentence& src = corpus[i].tokens;
    const TokenSentence& out = r.examples[i].tokens;
    ASSERT_EQ(out.size(), src.size());
    std::vector<size_t> diff;
    for (size_t k = 0; k < src.size(); ++k) {
      if (!(src[k] == out[k])) diff.push_back(k);
    }
    if (r.examples[i].label == 0) {
      EXPECT_TRUE(diff.empty());
      continue;
    }
    const size_t p = r.swap_positions.at(corpus[i].example_id);
    TokenSentence swapped = src;
    std::swap(swapped[p], swapped[p + 1]);
    EXPECT_EQ(out, swapped);
  }
}

TEST(BShift, PositiveRate) {
  std::vector<BShiftInput> corpus;
  for (int i = 0; i < 10000; ++i) corpus.push_back({std::to_string(i), {{"a", "X"}, {"b", "Y"}}});
  const BShiftResult r = generate_bshift(corpus, 42, kHindi);
  size_t positives = 0;
  for (const auto& e : r.examples) positives += e.label;
  const double rate = static_cast<double>(positives) / 10000.0;
  EXPECT_GE(rate, 0.18);
  EXPECT_LE(rate, 0.22);
}

TEST(Dataset, EmptyDocument) {
  const Dataset ds = build_dataset(ssf::SsfDocument{}, {kAllTasks.begin(), kAllTasks.end()}, 0,
                                   kHindi);
  for (TaskKind t : kAllTasks) {
    EXPECT_TRUE(ds.examples.at(t).empty());
    EXPECT_EQ(ds.stats.at(t).attempted, 0u);
  }
}

TEST(Dataset, FixtureTally) {
  const ssf::SsfDocument doc =
      ssf::parse_document(read_file(kFixtures + "/hi_sample.ssf"), "hi_sample.ssf");
  const Dataset ds = build_dataset(doc, {kAllTasks.begin(), kAllTasks.end()}, 0, kHindi);
  // Counted by hand over the twelve sentences.
  const std::map<TaskKind, size_t> produced = {
      {TaskKind::kSentLen, 12}, {TaskKind::kTreeDepth, 12}, {TaskKind::kBShift, 12},
      {TaskKind::kSubjNum, 7},  {TaskKind::kObjNum, 5},     {TaskKind::kVerbGen, 11},
      {TaskKind::kVerbNum, 12}, {TaskKind::kVerbPer, 12}};
  for (const auto& [task, n] : produced) {
    EXPECT_EQ(ds.stats.at(task).produced, n) << task_name(task);
    EXPECT_EQ(ds.examples.at(task).size(), n) << task_name(task);
    EXPECT_EQ(ds.stats.at(task).attempted, 12u);
  }
  EXPECT_EQ(ds.stats.at(TaskKind::kSubjNum).skipped.at("head is not a noun"), 5u);
  EXPECT_EQ(ds.stats.at(TaskKind::kObjNum).skipped.at("no k2 chunk"), 6u);
  EXPECT_EQ(ds.stats.at(TaskKind::kObjNum).skipped.at("conflicting number evidence"), 1u);
  EXPECT_EQ(ds.stats.at(TaskKind::kVerbGen).skipped.at("empty morph slot"), 1u);
}

TEST(Dataset, MatchesExpectedSidecar) {
  const auto expected = nlohmann::json::parse(read_file(kFixtures + "/expected_labels.json"));
  const uint64_t seed = expected["seed"].get<uint64_t>();
  for (const auto& set : expected["sets"]) {
    std::vector<ssf::SsfDocument> docs;
    for (const auto& f : set["files"]) {
      const std::string name = f.get<std::string>();
      docs.push_back(ssf::parse_document(read_file(kFixtures + "/" + name), name));
    }
    ExtractorConfig cfg;
    cfg.language = set["language"].get<std::string>();
    const Dataset ds = build_dataset(docs, {kAllTasks.begin(), kAllTasks.end()}, seed, cfg);
    for (TaskKind t : kAllTasks) {
      std::map<std::string, std::string> got;
      for (const auto& e : ds.examples.at(t)) got[e.example_id] = e.label_name;
      const auto want = set["labels"][task_name(t)].get<std::map<std::string, std::string>>();
      EXPECT_EQ(got, want) << task_name(t) << " in " << set["files"].dump();
    }
  }
}

TEST(Dataset, BinsExercisedTwice) {
  std::vector<ssf::SsfDocument> docs;
  for (const char* name : {"hi_sample.ssf", "hi_bins.ssf"}) {
    docs.push_back(ssf::parse_document(read_file(kFixtures + "/" + name), name));
  }
  const Dataset ds = build_dataset(docs, {TaskKind::kSentLen, TaskKind::kTreeDepth}, 0, kHindi);
  for (TaskKind t : {TaskKind::kSentLen, TaskKind::kTreeDepth}) {
    std::vector<int> counts(class_count(t), 0);
    for (const auto& e : ds.examples.at(t)) ++counts[e.label];
    for (size_t b = 0; b < counts.size(); ++b) {
      EXPECT_GE(counts[b], 2) << task_name(t) << " bin " << label_names(t)[b];
    }
  }
}

TEST(Dataset, MalayalamHasNoVerbTasks) {
  ExtractorConfig ml;
  ml.language = "ml";
  const ssf::SsfDocument doc =
      ssf::parse_document(read_file(kFixtures + "/ml_sample.ssf"), "ml_sample.ssf");
  const Dataset ds = build_dataset(doc, {kAllTasks.begin(), kAllTasks.end()}, 0, ml);
  EXPECT_TRUE(ds.examples.at(TaskKind::kVerbGen).empty());
  EXPECT_TRUE(ds.examples.at(TaskKind::kVerbNum).empty());
  EXPECT_TRUE(ds.examples.at(TaskKind::kVerbPer).empty());
  EXPECT_FALSE(ds.examples.at(TaskKind::kSentLen).empty());
}

TEST(Dataset, LabelsInRangeAndDeterministic) {
  Rng rng(1);
  const ssf::SsfDocument doc = gen::random_document(rng, 200);
  const std::set<TaskKind> all(kAllTasks.begin(), kAllTasks.end());
  const Dataset a = build_dataset(doc, all, 9, kHindi);
  const Dataset b = build_dataset(doc, all, 9, kHindi);
  for (TaskKind t : kAllTasks) {
    EXPECT_EQ(to_jsonl(a.examples.at(t)), to_jsonl(b.examples.at(t)));
    for (const auto& e : a.examples.at(t)) {
      EXPECT_GE(e.label, 0);
      EXPECT_LT(static_cast<size_t>(e.label), class_count(t));
      EXPECT_FALSE(e.tokens.empty());
    }
  }
}

TEST(Jsonl, SchemaAndRoundTrip) {
  ProbingExample ex;
  ex.example_id = "hi_sample/1";
  ex.language = "hi";
  ex.task = TaskKind::kSentLen;
  ex.tokens = {{"ram", "NNP"}, {"\xE0\xA4\x95", "NN"}};
  ex.label = 1;
  ex.label_name = "(6-8)";
  const std::string line = to_jsonl_line(ex);
  EXPECT_EQ(line,
            "{\"id\":\"hi_sample/1\",\"lang\":\"hi\",\"task\":\"SentLen\",\"tokens\":"
            "[[\"ram\",\"NNP\"],[\"\xE0\xA4\x95\",\"NN\"]],\"label\":1,\"label_name\":\"(6-8)\"}");
  EXPECT_EQ(from_jsonl_line(line), ex);
  ex.perturbation = "DropN";
  EXPECT_EQ(from_jsonl(to_jsonl({ex, ex})), (std::vector<ProbingExample>{ex, ex}));
}
