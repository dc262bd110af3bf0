#include "actguard/prompts.hpp"

#include "actguard/error.hpp"
#include "actguard/parser.hpp"

namespace actguard {
namespace {

constexpr std::string_view kTarsPreamble =
    "You are a GUI agent. You are given a task and your action history, with screenshots. "
    "You need to perform the next action to complete the task.\n"
    "\n"
    "## Output Format\n"
    "Thought: ...\n"
    "Action: ...\n"
    "\n"
    "## Action Space\n"
    "\n";

constexpr std::string_view kTarsV1Actions =
    "click(point='(x1 y1)')\n"
    "long_press(point='(x1 y1)')\n"
    "type(content='')\n"
    "scroll(point='(x1 y1)', direction='down or up or right or left')\n"
    "open_app(app_name='')\n"
    "drag(start_point='(x1 y1)', end_point='(x2 y2)')\n"
    "press_home()\n"
    "press_back()\n"
    "finished(content='xxx')\n";

constexpr std::string_view kTarsV15Actions =
    "click(point='<|box_start|>(x1 y1)<|box_end|>')\n"
    "long_press(point='<|box_start|>(x1 y1)<|box_end|>')\n"
    "type(content='')\n"
    "scroll(point='<|box_start|>(x1 y1)<|box_end|>', direction='down or up or right or left')\n"
    "open_app(app_name='')\n"
    "drag(start_point='<|box_start|>(x1 y1)<|box_end|>', end_point='<|box_start|>(x2 y2)<|box_end|>')\n"
    "press_home()\n"
    "press_back()\n"
    "finished(content='xxx')\n";

constexpr std::string_view kTarsNote =
    "\n"
    "## Note\n"
    "- Use English in Thought part.\n"
    "- Summarize your next action (with its target element) in one sentence in Thought part.\n"
    "\n"
    "## User Instruction\n";

constexpr std::string_view kQwenToolsHead =
    "You are a GUI Agent.\n"
    "\n"
    "# Tools\n"
    "\n"
    "You may call one or more functions to assist with the user query.\n"
    "\n"
    "You are provided with function signatures within <tools></tools> XML tags:\n"
    "<tools>\n"
    "{\"type\": \"function\", \"function\": {\"name\": \"mobile_use\", \"description\": \"Use a touchscreen to "
    "interact with a mobile device, and take screenshots.\n"
    "* This is an interface to a mobile device with touchscreen. You can perform actions like clicking, typing, "
    "swiping, etc.\n"
    "* Some applications may take time to start or process actions, so you may need to wait and take successive "
    "screenshots to see the results of your actions.\n"
    "* The screen's resolution is ";

constexpr std::string_view kQwenToolsTail =
    ".\n"
    "* Make sure to click any buttons, links, icons, etc with the cursor tip in the center of the element. "
    "Don't click boxes on their edges unless asked.\", "
    "\"parameters\": {\"properties\": {"
    "\"action\": {\"description\": \"The action to perform. The available actions are:\n"
    "* `key`: Perform a key event on the mobile device.\n"
    "    - This supports adb's `keyevent` syntax.\n"
    "    - Examples: \\\"volume_up\\\", \\\"volume_down\\\", \\\"power\\\", \\\"camera\\\", \\\"clear\\\".\n"
    "* `click`: Click the point on the screen with coordinate (x, y).\n"
    "* `long_press`: Press the point on the screen with coordinate (x, y) for specified seconds.\n"
    "* `swipe`: Swipe from the starting point with coordinate (x, y) to the end point with coordinates2 (x2, y2).\n"
    "* `type`: Input the specified text into the activated input box.\n"
    "* `system_button`: Press the system button.\n"
    "* `open`: Open an app on the device.\n"
    "* `wait`: Wait specified seconds for the change to happen.\n"
    "* `terminate`: Terminate the current task and report its completion status.\", "
    "\"enum\": [\"key\", \"click\", \"long_press\", \"swipe\", \"type\", \"system_button\", \"open\", \"wait\", "
    "\"terminate\"], \"type\": \"string\"}, "
    "\"coordinate\": {\"description\": \"(x, y): The x (pixels from the left edge) and y (pixels from the top "
    "edge) coordinates to move the mouse to. Required only by `action=click`, `action=long_press`, and "
    "`action=swipe`.\", \"type\": \"array\"}, "
    "\"coordinate2\": {\"description\": \"(x, y): The x (pixels from the left edge) and y (pixels from the top "
    "edge) coordinates to move the mouse to. Required only by `action=swipe`.\", \"type\": \"array\"}, "
    "\"text\": {\"description\": \"Required only by `action=key`, `action=type`, and `action=open`.\", "
    "\"type\": \"string\"}, "
    "\"time\": {\"description\": \"The seconds to wait. Required only by `action=long_press` and "
    "`action=wait`.\", \"type\": \"number\"}, "
    "\"button\": {\"description\": \"Back means returning to the previous interface, Home means returning to "
    "the desktop, Menu means opening the application background menu, and Enter means pressing the enter. "
    "Required only by `action=system_button`\", \"enum\": [\"Back\", \"Home\", \"Menu\", \"Enter\"], "
    "\"type\": \"string\"}, "
    "\"status\": {\"description\": \"The status of the task. Required only by `action=terminate`.\", "
    "\"type\": \"string\", \"enum\": [\"success\", \"failure\"]}}, "
    "\"required\": [\"action\"], \"type\": \"object\"}}}\n"
    "</tools>\n"
    "\n"
    "For each function call, return a json object with function name and arguments within "
    "<tool_call></tool_call> XML tags:\n"
    "<tool_call>\n"
    "{\"name\": <function-name>, \"arguments\": <args-json-object>}\n"
    "</tool_call>";

constexpr std::string_view kCriticHead =
    "You are an expert in evaluating the performance of a phone operating agent. The agent is designed to help "
    "a user to complete a task or retrieve information from the phone.\n"
    "Given the user's task instruction, current action and current screenshot, your goal is to decide whether "
    "the agent's current action is correct or not.\n"
    "Each action in the sequence is preceded by a corresponding screenshot that captures the context in which "
    "the action occurs.\n"
    "\n"
    "## Evaluation Criteria\n"
    "Whether the agent's current action is correct and corresponding to the user's task instruction.\n"
    "\n"
    "## IMPORTANT\n"
    "1. An action always follows a corresponding screenshot (even if only the last few are provided).\n"
    "2. If the current action is a tap on the screen, the point where the action is clicked is marked with a "
    "red circle on the screenshot.\n"
    "3. You should whether answer [correct] or [wrong].\n"
    "\n"
    "## Input\n"
    "The input is given next, including global_task_instruction, action_history, current_action, and "
    "screenshot.\n";

std::string instruction_line(const StepContext& ctx, TaskLevel level) {
  std::string line = ctx.global_instruction;
  if (level == TaskLevel::Low) line += "  (You need to: " + *ctx.step_plan + ")";
  return line;
}

}  // namespace

std::string_view to_string(TaskLevel level) { return level == TaskLevel::High ? "high" : "low"; }

AgentPrompt build_agent_prompt(DialectId dialect, const StepContext& ctx, TaskLevel level) {
  if (level == TaskLevel::Low && !ctx.step_plan) {
    throw Error(ErrorCode::MissingStepPlan, "low-level prompt requires a step plan");
  }
  const std::string history = render_history(ctx.history);
  AgentPrompt p;
  if (dialect == DialectId::QwenToolCall) {
    p.system = std::string(kQwenToolsHead) + std::to_string(ctx.screenshot.dims.width) + "x" +
               std::to_string(ctx.screenshot.dims.height) + std::string(kQwenToolsTail);
    p.user = "The user query:  " + instruction_line(ctx, level) + "\n" +
             "Task progress (You have done the following operation on the current device): \n" + history +
             "\n\n" + std::string(kImageSlot);
    return p;
  }
  p.system = std::string(kTarsPreamble) +
             std::string(dialect == DialectId::UiTarsV15 ? kTarsV15Actions : kTarsV1Actions) +
             std::string(kTarsNote);
  p.user = "- User Instruction\n" + instruction_line(ctx, level) + "\n\n" + "- Action History\n" + history +
           "\n\n" + "- Current Screenshot\n" + std::string(kImageSlot);
  return p;
}

std::string build_critic_prompt(const StepContext& ctx, const Action& action) {
  return std::string(kCriticHead) + "The goal of the task (instruction): " + ctx.global_instruction + "\n" +
         "Action (plan) history: " + render_history(ctx.history) + "\n" +
         "Current action of the agent: " + actor_set(action) + "\n" + "Screenshot: " + std::string(kImageSlot);
}

}  // namespace actguard
