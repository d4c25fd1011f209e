#include "refine_loop/harness/synthetic.hpp"

#include <cstdio>
#include <map>

#include "refine_loop/core/text.hpp"
#include "refine_loop/harness/rng.hpp"

namespace refine_loop::harness {
namespace {

const std::vector<std::string> kAgents = {"Alice", "Priya", "Marcus", "Elena", "Tomas", "Grace", "Omar", "Hana"};
const std::vector<std::string> kCustomers = {"Bob", "Carla", "Dev", "Ines", "Jonah", "Keiko", "Luis", "Mina"};
const std::vector<std::string> kCompanies = {"Northwind", "Brightline", "Keystone", "Bluepeak"};
const std::vector<std::string> kProducts = {"router", "laptop", "printer", "phone", "thermostat", "tablet"};
const std::vector<std::string> kSymptoms = {"connecting to the network", "charging", "syncing", "turning on",
                                            "saving settings"};
const std::vector<std::string> kDays = {"Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"};
const std::vector<std::string> kDomains = {"mailbox.net", "example.org", "inbox.io", "post.com"};

const std::vector<std::pair<std::string, std::string>> kSmallTalk = {
    {"By the way, how long have you worked at {company}?",
     "About {years} years now, and I still enjoy helping people with their {product} questions every single day."},
    {"Is the weather nice where you are today?",
     "It is a little cloudy here, but the forecast says the sun should come out later in the afternoon."},
    {"Do you get a lot of calls about this kind of problem?",
     "We do see it from time to time, usually right after a big update goes out to everyone at once."},
    {"I was worried I would have to buy a new {product} this week.",
     "I understand, it is always frustrating when something you rely on suddenly stops working like that."},
    {"My neighbor had the same model and never had any trouble with it.",
     "Every unit behaves a bit differently, and the settings can drift after several updates over time."},
    {"Can I call back later if it stops working again tonight?",
     "Of course, just mention this conversation and whoever answers will be able to pick it up quickly."},
};

std::string fill(std::string text, const std::map<std::string, std::string>& slots) {
  for (const auto& [name, value] : slots) {
    const std::string key = "{" + name + "}";
    for (std::size_t at = text.find(key); at != std::string::npos; at = text.find(key, at + value.size())) {
      text.replace(at, key.size(), value);
    }
  }
  return text;
}

std::size_t word_count(const std::vector<Turn>& turns) {
  std::size_t n = 0;
  for (const Turn& t : turns) n += tokenize_words(t.text).size();
  return n;
}

}  // namespace

SyntheticCase synthetic_case(std::string id, std::uint64_t seed, std::size_t min_words) {
  Rng rng(seed);
  std::map<std::string, std::string> slots;
  slots["agent"] = rng.pick(kAgents);
  slots["customer"] = rng.pick(kCustomers);
  slots["company"] = rng.pick(kCompanies);
  slots["product"] = rng.pick(kProducts);
  slots["symptom"] = rng.pick(kSymptoms);
  slots["day"] = rng.pick(kDays);
  slots["domain"] = rng.pick(kDomains);
  slots["n"] = std::to_string(rng.between(2, 9));
  slots["ver"] = std::to_string(rng.between(2, 9)) + "." + std::to_string(rng.between(0, 9));
  slots["amount"] = std::to_string(rng.between(1, 10) * 5);
  slots["years"] = std::to_string(rng.between(2, 12));

  const std::string& agent = slots["agent"];
  const std::string& customer = slots["customer"];
  std::vector<std::pair<std::string, std::string>> lines = {
      {agent, "Thanks for calling {company} support, this is {agent}. How can I help you today?"},
      {customer, "Hi {agent}, I'm {customer}. My {product} stopped {symptom} after the update yesterday."},
      {agent, "I'm sorry to hear that. Can you confirm the email address on your account?"},
      {customer, "Sure, it's the one ending in {domain}."},
      {agent, "Thank you, you are verified. When did you first notice the problem?"},
      {customer, "It started on {day} morning and it has happened {n} times since."},
      {agent, "I can see a known issue with version {ver}. I will reset your {product} settings remotely."},
      {customer, "Okay, go ahead."},
      {agent, "The reset is done. Could you try it now?"},
      {customer, "Yes, it works again. Thank you so much."},
      {agent, "You're welcome. I have also added a credit of {amount} dollars to your account."},
  };
  const std::pair<std::string, std::string> closing = {customer, "That's great, have a nice day."};

  std::vector<Turn> turns;
  auto rebuild = [&] {
    turns.clear();
    for (const auto& [speaker, text] : lines) turns.push_back({turns.size(), speaker, fill(text, slots), {}, {}});
    turns.push_back({turns.size(), closing.first, fill(closing.second, slots), {}, {}});
  };
  rebuild();
  // Small talk goes in before the closing turn so the attributed turns keep their indices.
  while (word_count(turns) < min_words) {
    const auto& [question, answer] = rng.pick(kSmallTalk);
    lines.emplace_back(customer, question);
    lines.emplace_back(agent, answer);
    rebuild();
  }

  SyntheticCase out;
  out.dialogue = make_dialogue(id, turns);
  const std::vector<std::pair<std::string, std::vector<std::size_t>>> sentences = {
      {"{customer} contacted {company} support because the {product} stopped {symptom} after an update.", {1}},
      {"{agent} verified {customer}'s identity using the account email.", {2, 3, 4}},
      {"The problem started on {day} and had happened {n} times.", {5}},
      {"{agent} identified a known issue with version {ver} and reset the {product} settings remotely.", {6, 8}},
      {"{customer} confirmed that the {product} worked again.", {9}},
      {"{agent} added a credit of {amount} dollars to the account.", {10}},
  };
  out.summary.dialogue_id = id;
  for (const auto& [text, attributions] : sentences) {
    out.summary.sentences.push_back(
        {out.summary.sentences.size(), fill(text, slots), attributions, SentenceOrigin::Draft});
  }
  return out;
}

std::vector<SyntheticCase> synthetic_corpus(std::size_t n, std::uint64_t seed, std::size_t min_words) {
  std::vector<SyntheticCase> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "synthetic-%03zu", i + 1);
    out.push_back(synthetic_case(id, derive_seed(seed, id), min_words));
  }
  return out;
}

}  // namespace refine_loop::harness
