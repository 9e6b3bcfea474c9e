import json

import pytest

from phrasetree.textnorm import TokenNormalizer

TRAINS_SERVICE = {
    "service_name": "Trains_1",
    "description": "Service to find and reserve train journeys",
    "slots": [
        {"name": "from_city", "description": "Starting city for the train journey",
         "is_categorical": False, "possible_values": []},
        {"name": "date", "description": "Date of the train journey",
         "is_categorical": False, "possible_values": []},
        {"name": "fare", "description": "Fare per ticket for journey",
         "is_categorical": False, "possible_values": []},
        {"name": "seat_class", "description": "Seating class for the reservation",
         "is_categorical": True, "possible_values": ["economy", "business", "first"]},
    ],
    "intents": [
        {"name": "FindTrain", "description": "Find a train for a journey",
         "required_slots": ["from_city", "date"],
         "optional_slots": {"seat_class": "economy"}},
        {"name": "BuyTicket", "description": "Buy a ticket for a train",
         "required_slots": ["from_city", "date", "seat_class"],
         "optional_slots": {}},
    ],
}

HOTELS_SERVICE = {
    "service_name": "Hotels_1",
    "description": "Service to search for hotels and make reservations",
    "slots": [
        {"name": "hotel_name", "description": "Name of the hotel",
         "is_categorical": False, "possible_values": []},
        {"name": "star_rating", "description": "Star rating of the hotel",
         "is_categorical": True, "possible_values": ["1", "2", "3", "4", "5"]},
    ],
    "intents": [
        {"name": "ReserveHotel", "description": "Reserve rooms at a hotel",
         "required_slots": ["hotel_name"], "optional_slots": {"star_rating": "3"}},
    ],
}

DIALOGUE_1 = {
    "dialogue_id": "1_00000",
    "services": ["Trains_1"],
    "turns": [
        {"speaker": "USER",
         "utterance": "I need a train from Sacramento on march 3rd.",
         "frames": [{"service": "Trains_1",
                     "state": {"active_intent": "FindTrain",
                               "requested_slots": [],
                               "slot_values": {"from_city": ["Sacramento"],
                                               "date": ["march 3rd"]}}}]},
        {"speaker": "SYSTEM",
         "utterance": "What class would you like?",
         "frames": [{"service": "Trains_1"}]},
        {"speaker": "USER",
         "utterance": "Business class please.",
         "frames": [{"service": "Trains_1",
                     "state": {"active_intent": "BuyTicket",
                               "requested_slots": [],
                               "slot_values": {"from_city": ["Sacramento"],
                                               "date": ["march 3rd"],
                                               "seat_class": ["business"]}}}]},
    ],
}

DIALOGUE_2 = {
    "dialogue_id": "1_00001",
    "services": ["Hotels_1"],
    "turns": [
        {"speaker": "USER",
         "utterance": "Find me a 4 star hotel called Palace Inn.",
         "frames": [{"service": "Hotels_1",
                     "state": {"active_intent": "ReserveHotel",
                               "requested_slots": [],
                               "slot_values": {"hotel_name": ["Palace Inn"],
                                               "star_rating": ["4"]}}}]},
        {"speaker": "SYSTEM",
         "utterance": "Booked.",
         "frames": [{"service": "Hotels_1"}]},
    ],
}


@pytest.fixture(scope="session")
def normalizer():
    return TokenNormalizer.default()


@pytest.fixture
def schema_file(tmp_path):
    path = tmp_path / "schema.json"
    path.write_text(json.dumps([TRAINS_SERVICE, HOTELS_SERVICE], indent=1),
                    encoding="utf-8")
    return path


@pytest.fixture
def dialogue_dir(tmp_path):
    d = tmp_path / "dialogues"
    d.mkdir()
    (d / "dialogues_001.json").write_text(json.dumps([DIALOGUE_1]), encoding="utf-8")
    (d / "dialogues_002.json").write_text(json.dumps([DIALOGUE_2]), encoding="utf-8")
    return d


@pytest.fixture
def loaded_schemas(schema_file):
    from phrasetree.corpus import load_schemas
    return load_schemas(schema_file)


@pytest.fixture
def loaded_dialogues(dialogue_dir):
    from phrasetree.corpus import load_dialogues
    return load_dialogues(dialogue_dir)
