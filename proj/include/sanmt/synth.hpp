#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sanmt/rng.hpp"

namespace sanmt {

// Synthetic agreement language. Source sentences follow
//   SUBJECT  (PREP NOUN){1..4}  VERB  OBJECT
// where every noun inside the prepositional chain has the opposite
// number of the subject. The target copies the sentence but inflects the
// verb for the subject's number (+s singular, bare plural), so producing
// the right verb form requires finding the subject rather than the
// nearest noun. Gold trees root the verb, attach subject and object to
// it, and chain each preposition to the preceding noun.
struct SynthSentence {
  std::vector<std::string> src;
  std::vector<std::string> tgt;
  std::vector<int> heads;  // 1-based, 0 = root
  std::vector<std::string> upos;
  bool subject_singular = false;
  int verb_pos = 0;  // 1-based position of the verb
};

SynthSentence synth_sentence(Rng& rng);

// Writes src.txt, tgt.txt and gold.conllu under out_dir.
void make_synthetic_corpus(int size, std::uint64_t seed, const std::string& out_dir);

std::vector<SynthSentence> synth_corpus(int size, std::uint64_t seed);

// Lexicon membership tests used by the analysis tooling.
bool synth_is_verb_form(const std::string& tok);
bool synth_is_preposition(const std::string& tok);

}  // namespace sanmt
