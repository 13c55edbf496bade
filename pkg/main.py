"""Example usage of corridor_nav package."""

import logging

from corridor_nav import Navigator, OracleProvider, builtin_environment, parse_command


def main():
    """Drive the robot through two commands in env_a with the geometric oracle."""
    logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
    print("Corridor Navigation Example")

    env = builtin_environment("env_a")
    navigator = Navigator(env, OracleProvider())

    for index, text in enumerate(["go to the window", "go to Room Number 105"], start=1):
        command = parse_command(text, env)
        result = navigator.run_command(command, index)
        metrics = result.metrics
        print(f"{text!r} -> {result.state.label}")
        print(f"  path length: {metrics.path_length:.2f} m")
        print(f"  execution time: {metrics.execution_time:.2f} s")
        print(f"  replans: {metrics.replan_attempts}")

    # Example using the local model server instead of the oracle:
    # from corridor_nav import LlmEndpointConfig, LlmProvider
    # with LlmProvider(LlmEndpointConfig(base_url="http://localhost:11434", model_name="llama3.1")) as llm:
    #     Navigator(env, llm).run_command(parse_command("go to RNP 103", env))


if __name__ == "__main__":
    main()
