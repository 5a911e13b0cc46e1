from plab import create_lab
from plab.schemas import write_default_scenarios


def main():
    lab = create_lab()
    directory = lab.config["SCENARIO_DIR"]
    written = write_default_scenarios(directory)
    print(f"Scenarios initialised in {directory}/. {len(written)} default files created (if missing).")


if __name__ == "__main__":
    main()
